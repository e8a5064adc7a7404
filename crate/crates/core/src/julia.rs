//! Escape-time membership for the filled Julia set of `f` and for the
//! Fibonacci set `E_p` (boundedness of `q_{F_k}`), plus backward orbits of 1.

use num_complex::Complex64;
use serde::Serialize;

use crate::chain::{Base, ProbParam};
use crate::error::{Error, Result};
use crate::qseq::{f_map, fib_step, g_map, h_map};

/// Default escape radius. For `|z| > 4`, `|f(z)| >= (|z| - 1)^2 > 2|z|`, so
/// escape past 4 is permanent.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 4.0;

/// Fate of an orbit after at most `max_iter` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fate {
    /// Exceeded the escape radius at this iteration.
    Escaped(u32),
    Bounded,
}

impl Fate {
    pub fn is_bounded(self) -> bool {
        self == Fate::Bounded
    }

    pub fn escape_iter(self) -> Option<u32> {
        match self {
            Fate::Escaped(n) => Some(n),
            Fate::Bounded => None,
        }
    }
}

/// First `n <= max_iter` with `|f^n(lambda)| > r_esc`.
pub fn escapes_f(lambda: Complex64, p: ProbParam, max_iter: u32, r_esc: f64) -> Fate {
    let r2 = r_esc * r_esc;
    let mut z = lambda;
    for n in 0..=max_iter {
        if z.norm_sqr() > r2 {
            return Fate::Escaped(n);
        }
        if n < max_iter {
            z = f_map(z, p);
        }
    }
    Fate::Bounded
}

/// Iterates `q_{F_k}` and escapes at the first `k >= 1` with both
/// `|q_{F_k}|` and `|q_{F_(k-1)}|` above `r_esc`. A single large value can be
/// pulled back by a small partner, so one coordinate is not enough.
pub fn ep_escape_with_radius(lambda: Complex64, p: ProbParam, max_iter: u32, r_esc: f64) -> Fate {
    let r2 = r_esc * r_esc;
    let mut prev = h_map(lambda, p);
    let mut cur = prev * prev;
    for k in 1..=max_iter {
        if cur.norm_sqr() > r2 && prev.norm_sqr() > r2 {
            return Fate::Escaped(k);
        }
        if k < max_iter {
            let next = fib_step(cur, prev, p.get());
            prev = cur;
            cur = next;
        }
    }
    Fate::Bounded
}

pub fn ep_escape(lambda: Complex64, p: ProbParam, max_iter: u32) -> Fate {
    ep_escape_with_radius(lambda, p, max_iter, DEFAULT_ESCAPE_RADIUS)
}

/// Iterates `g` from `(x, y)`; escape once both coordinates exceed `r_esc`.
pub fn g_orbit_escapes(
    start: (Complex64, Complex64),
    p: ProbParam,
    max_iter: u32,
    r_esc: f64,
) -> Fate {
    let r2 = r_esc * r_esc;
    let mut xy = start;
    for t in 0..=max_iter {
        if xy.0.norm_sqr() > r2 && xy.1.norm_sqr() > r2 {
            return Fate::Escaped(t);
        }
        if t < max_iter {
            xy = g_map(xy, p);
        }
    }
    Fate::Bounded
}

/// Sampling window in the complex plane; pixels are sampled at cell centers,
/// row 0 at the top (largest imaginary part).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(re: (f64, f64), im: (f64, f64), width: usize, height: usize) -> Result<Self> {
        if re.0.partial_cmp(&re.1) != Some(std::cmp::Ordering::Less)
            || im.0.partial_cmp(&im.1) != Some(std::cmp::Ordering::Less)
        {
            return Err(Error::InvalidGrid("window bounds must be increasing"));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid("resolution must be positive"));
        }
        if width.saturating_mul(height) > 100_000_000 {
            return Err(Error::InvalidGrid("more than 1e8 pixels"));
        }
        Ok(GridSpec {
            re_min: re.0,
            re_max: re.1,
            im_min: im.0,
            im_max: im.1,
            width,
            height,
        })
    }

    /// Square window `[-half, half]^2`.
    pub fn square(half: f64, res: usize) -> Result<Self> {
        Self::new((-half, half), (-half, half), res, res)
    }

    pub fn pixel_center(&self, x: usize, y: usize) -> Complex64 {
        let dx = (self.re_max - self.re_min) / self.width as f64;
        let dy = (self.im_max - self.im_min) / self.height as f64;
        Complex64::new(
            self.re_min + (x as f64 + 0.5) * dx,
            self.im_max - (y as f64 + 0.5) * dy,
        )
    }

    /// Pixel containing `z`, if it lies in the window.
    pub fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let fx = (z.re - self.re_min) / (self.re_max - self.re_min) * self.width as f64;
        let fy = (self.im_max - z.im) / (self.im_max - self.im_min) * self.height as f64;
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-pixel escape iterations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeRaster {
    pub grid: GridSpec,
    pub base: Base,
    pub p: ProbParam,
    pub max_iter: u32,
    pub r_esc: f64,
    iterations: Vec<u32>,
}

impl EscapeRaster {
    /// Stored in place of an iteration count for pixels bounded through `max_iter`.
    pub const BOUNDED: u32 = u32::MAX;

    fn compute<F>(
        grid: GridSpec,
        base: Base,
        p: ProbParam,
        max_iter: u32,
        r_esc: f64,
        fate: F,
    ) -> Self
    where
        F: Fn(Complex64) -> Fate + Sync,
    {
        let cell = |i: usize| {
            let z = grid.pixel_center(i % grid.width, i / grid.width);
            fate(z).escape_iter().unwrap_or(Self::BOUNDED)
        };
        #[cfg(feature = "parallel")]
        let iterations = {
            use rayon::prelude::*;
            (0..grid.len()).into_par_iter().map(cell).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let iterations = (0..grid.len()).map(cell).collect();
        EscapeRaster {
            grid,
            base,
            p,
            max_iter,
            r_esc,
            iterations,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Fate {
        match self.iterations[y * self.grid.width + x] {
            Self::BOUNDED => Fate::Bounded,
            n => Fate::Escaped(n),
        }
    }

    pub fn iterations(&self) -> &[u32] {
        &self.iterations
    }

    pub fn bounded_count(&self) -> usize {
        self.iterations
            .iter()
            .filter(|&&n| n == Self::BOUNDED)
            .count()
    }

    /// Centers of the bounded pixels.
    pub fn bounded_points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.iterations
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == Self::BOUNDED)
            .map(|(i, _)| {
                self.grid
                    .pixel_center(i % self.grid.width, i / self.grid.width)
            })
    }

    /// Binary PPM (P6), gray levels from [`Self::shade`]; `comment` lines go
    /// in the header.
    pub fn write_ppm<W: std::io::Write>(&self, mut out: W, comment: &str) -> std::io::Result<()> {
        writeln!(out, "P6")?;
        for line in comment.lines() {
            writeln!(out, "# {line}")?;
        }
        write!(out, "{} {}\n255\n", self.grid.width, self.grid.height)?;
        let mut bytes = Vec::with_capacity(3 * self.iterations.len());
        for i in 0..self.iterations.len() {
            let g = self.shade(i);
            bytes.extend_from_slice(&[g, g, g]);
        }
        out.write_all(&bytes)
    }

    /// Grayscale shade: bounded pixels black, fast escapes bright.
    pub fn shade(&self, i: usize) -> u8 {
        match self.iterations[i] {
            Self::BOUNDED => 0,
            n => {
                let t = (n as f64 + 1.0).ln() / (self.max_iter as f64 + 1.0).ln();
                (255.0 * (1.0 - t)).round().clamp(24.0, 255.0) as u8
            }
        }
    }
}

/// Filled Julia set of `f` with the default escape radius.
pub fn filled_julia_grid(p: ProbParam, grid: GridSpec, max_iter: u32) -> EscapeRaster {
    filled_julia_grid_with_radius(p, grid, max_iter, DEFAULT_ESCAPE_RADIUS)
}

pub fn filled_julia_grid_with_radius(
    p: ProbParam,
    grid: GridSpec,
    max_iter: u32,
    r_esc: f64,
) -> EscapeRaster {
    EscapeRaster::compute(grid, Base::Binary, p, max_iter, r_esc, |z| {
        escapes_f(z, p, max_iter, r_esc)
    })
}

/// The set `E_p` of `lambda` with bounded `q_{F_k}`.
pub fn ep_grid(p: ProbParam, grid: GridSpec, max_iter: u32) -> EscapeRaster {
    EscapeRaster::compute(
        grid,
        Base::Fibonacci,
        p,
        max_iter,
        DEFAULT_ESCAPE_RADIUS,
        |z| ep_escape(z, p, max_iter),
    )
}

/// Escape-time raster for either base: `J(f)` for binary, `E_p` for Fibonacci.
pub fn membership_grid(base: Base, p: ProbParam, grid: GridSpec, max_iter: u32) -> EscapeRaster {
    match base {
        Base::Binary => filled_julia_grid(p, grid, max_iter),
        Base::Fibonacci => ep_grid(p, grid, max_iter),
    }
}

pub fn membership(base: Base, lambda: Complex64, p: ProbParam, max_iter: u32) -> Fate {
    match base {
        Base::Binary => escapes_f(lambda, p, max_iter, DEFAULT_ESCAPE_RADIUS),
        Base::Fibonacci => ep_escape(lambda, p, max_iter),
    }
}

/// Points within `tol` of each other collapse to the first one seen.
fn dedup_points(points: Vec<Complex64>, tol: f64) -> Vec<Complex64> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].re.total_cmp(&points[b].re));
    let mut keep = vec![true; points.len()];
    for (pos, &i) in order.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        for &j in &order[pos + 1..] {
            if points[j].re - points[i].re > tol {
                break;
            }
            if keep[j] && (points[j] - points[i]).norm() <= tol {
                keep[if j > i { j } else { i }] = false;
            }
        }
    }
    points
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(z, _)| z)
        .collect()
}

/// Maximal backward-orbit depth accepted by [`preimages_of_one`].
pub const MAX_PREIMAGE_DEPTH: u32 = 20;

/// `f^{-depth}{1}` (which contains every shallower level, since 1 is fixed),
/// built level by level from `z = (1-p) +- p sqrt(w)`.
pub fn preimages_of_one(p: ProbParam, depth: u32) -> Result<Vec<Complex64>> {
    if depth > MAX_PREIMAGE_DEPTH {
        return Err(Error::InvalidParameter("preimage depth must be at most 20"));
    }
    let one = Complex64::new(1.0, 0.0);
    let mut all = vec![one];
    let mut frontier = vec![one];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for w in &frontier {
            let r = w.sqrt() * p.get();
            next.push(r + p.fail());
            next.push(-r + p.fail());
        }
        let start = all.len();
        all.extend(next);
        all = dedup_points(all, 1e-12);
        frontier = all[start.min(all.len())..].to_vec();
    }
    Ok(all)
}
