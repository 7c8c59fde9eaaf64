use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::linalg::Matrix;
use crate::scalar::Real;

/// Magic bytes of the binary field format.
pub const GRID_MAGIC: &[u8; 4] = b"IVNG";

#[derive(Debug, Error)]
pub enum GridIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes (expected IVNG)")]
    BadMagic,
    #[error("corrupt grid header: {0}")]
    BadHeader(String),
    #[error("non-finite value in grid payload")]
    NonFinite,
    #[error("unsupported pgm file: {0}")]
    BadPgm(String),
}

/// Dense space-time field: rows index space (`nx` points, spacing `dx`),
/// columns index time (`nt` points, spacing `dt`).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D<T = f64> {
    nx: usize,
    nt: usize,
    dx: T,
    dt: T,
    values: Vec<T>,
}

impl<T: Real> Grid2D<T> {
    pub fn zeros(nx: usize, nt: usize, dx: T, dt: T) -> Self {
        Self::from_values(nx, nt, dx, dt, vec![T::zero(); nx * nt])
    }

    pub fn from_values(nx: usize, nt: usize, dx: T, dt: T, values: Vec<T>) -> Self {
        assert!(nx >= 3 && nt >= 3, "grid must be at least 3x3");
        assert!(dx > T::zero() && dt > T::zero(), "spacings must be positive");
        assert_eq!(values.len(), nx * nt, "value count must equal nx*nt");
        Self {
            nx,
            nt,
            dx,
            dt,
            values,
        }
    }

    pub fn from_fn(nx: usize, nt: usize, dx: T, dt: T, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(nx * nt);
        for i in 0..nx {
            for j in 0..nt {
                values.push(f(i, j));
            }
        }
        Self::from_values(nx, nt, dx, dt, values)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn get(&self, ix: usize, it: usize) -> T {
        debug_assert!(ix < self.nx && it < self.nt);
        self.values[ix * self.nt + it]
    }

    pub fn set(&mut self, ix: usize, it: usize, v: T) {
        debug_assert!(ix < self.nx && it < self.nt);
        self.values[ix * self.nt + it] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Column `it` (one value per space point).
    pub fn column(&self, it: usize) -> Vec<T> {
        (0..self.nx).map(|ix| self.get(ix, it)).collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Frobenius relative error `||a - reference|| / ||reference||`.
    pub fn relative_l2(&self, reference: &Self) -> T {
        assert!(
            self.nx == reference.nx && self.nt == reference.nt,
            "relative_l2: shape mismatch"
        );
        let ref_norm = reference.frobenius_norm();
        assert!(ref_norm > T::zero(), "relative_l2: zero reference");
        let diff: T = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        diff.sqrt() / ref_norm
    }

    /// Same-shape 3x3 cross-correlation with replicate padding: border reads
    /// clamp to the edge value.
    pub fn conv2d_replicate(&self, kernel: &Matrix<T>) -> Self {
        assert!(
            kernel.rows() == 3 && kernel.cols() == 3,
            "conv2d_replicate: kernel must be 3x3"
        );
        let mut out = Self::zeros(self.nx, self.nt, self.dx, self.dt);
        let clamp = |v: isize, hi: usize| -> usize { v.clamp(0, hi as isize - 1) as usize };
        for i in 0..self.nx {
            for j in 0..self.nt {
                let mut acc = T::zero();
                for a in 0..3usize {
                    let src_i = clamp(i as isize + a as isize - 1, self.nx);
                    for b in 0..3usize {
                        let src_j = clamp(j as isize + b as isize - 1, self.nt);
                        acc = acc + kernel[(a, b)] * self.get(src_i, src_j);
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Serialize to the IVNG binary layout: magic, `nx`/`nt` as little-endian
    /// u32, `dx`/`dt` as little-endian f64, then row-major f64 values.
    pub fn write_ivng<W: Write>(&self, w: &mut W) -> Result<(), GridIoError> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(self.nx as u32).to_le_bytes())?;
        w.write_all(&(self.nt as u32).to_le_bytes())?;
        w.write_all(&self.dx.to_f64().unwrap().to_le_bytes())?;
        w.write_all(&self.dt.to_f64().unwrap().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_ivng<R: Read>(r: &mut R) -> Result<Self, GridIoError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(GridIoError::BadMagic);
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let nx = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let nt = u32::from_le_bytes(u32buf) as usize;
        if nx < 3 || nt < 3 || nx * nt > (1 << 28) {
            return Err(GridIoError::BadHeader(format!("nx={nx}, nt={nt}")));
        }
        let mut f64buf = [0u8; 8];
        r.read_exact(&mut f64buf)?;
        let dx = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf)?;
        let dt = f64::from_le_bytes(f64buf);
        if !(dx > 0.0 && dt > 0.0) {
            return Err(GridIoError::BadHeader(format!("dx={dx}, dt={dt}")));
        }
        let mut values = Vec::with_capacity(nx * nt);
        for _ in 0..nx * nt {
            r.read_exact(&mut f64buf)?;
            let v = f64::from_le_bytes(f64buf);
            if !v.is_finite() {
                return Err(GridIoError::NonFinite);
            }
            values.push(T::of(v));
        }
        Ok(Self::from_values(nx, nt, T::of(dx), T::of(dt), values))
    }

    pub fn save_ivng(&self, path: &Path) -> Result<(), GridIoError> {
        let mut f = std::fs::File::create(path)?;
        self.write_ivng(&mut f)
    }

    pub fn load_ivng(path: &Path) -> Result<Self, GridIoError> {
        let mut f = std::fs::File::open(path)?;
        Self::read_ivng(&mut f)
    }

    /// 8-bit binary PGM (P5) with linear min-max scaling; a constant field
    /// maps to black.
    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<(), GridIoError> {
        let lo = self
            .values
            .iter()
            .cloned()
            .fold(T::infinity(), |a, b| a.min(b));
        let hi = self
            .values
            .iter()
            .cloned()
            .fold(T::neg_infinity(), |a, b| a.max(b));
        let span = hi - lo;
        write!(w, "P5\n{} {}\n255\n", self.nt, self.nx)?;
        let mut bytes = Vec::with_capacity(self.nx * self.nt);
        for v in &self.values {
            let scaled = if span > T::zero() {
                ((*v - lo) / span).to_f64().unwrap()
            } else {
                0.0
            };
            bytes.push((scaled * 255.0).round().clamp(0.0, 255.0) as u8);
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn save_pgm(&self, path: &Path) -> Result<(), GridIoError> {
        let mut f = std::fs::File::create(path)?;
        self.write_pgm(&mut f)
    }
}

/// Parse an 8-bit binary PGM (P5) into `(rows, cols, grey values in [0,1])`.
pub fn read_pgm<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<f64>), GridIoError> {
    let mut content = Vec::new();
    r.read_to_end(&mut content)?;
    let mut pos = 0usize;
    let mut token = |content: &[u8]| -> Result<String, GridIoError> {
        while pos < content.len() {
            let c = content[pos];
            if c == b'#' {
                while pos < content.len() && content[pos] != b'\n' {
                    pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < content.len() && !content[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(GridIoError::BadPgm("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&content[start..pos]).into_owned())
    };
    if token(&content)? != "P5" {
        return Err(GridIoError::BadPgm("not a P5 file".into()));
    }
    let cols: usize = token(&content)?
        .parse()
        .map_err(|_| GridIoError::BadPgm("bad width".into()))?;
    let rows: usize = token(&content)?
        .parse()
        .map_err(|_| GridIoError::BadPgm("bad height".into()))?;
    let maxval: usize = token(&content)?
        .parse()
        .map_err(|_| GridIoError::BadPgm("bad maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(GridIoError::BadPgm(format!("unsupported maxval {maxval}")));
    }
    pos += 1; // single whitespace byte after maxval
    if content.len() < pos + rows * cols {
        return Err(GridIoError::BadPgm("truncated payload".into()));
    }
    let values = content[pos..pos + rows * cols]
        .iter()
        .map(|&b| b as f64 / maxval as f64)
        .collect();
    Ok((rows, cols, values))
}
