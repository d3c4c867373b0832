//! Densities tabulated on uniform grids.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, Metadata};
use crate::parallel::{map_indexed, Execution};

/// Relative mismatch in spacing below which two grids count as commensurate.
const SPACING_TOL: f64 = 1e-9;

/// A uniform grid `start, start + dx, …, end` with `points` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::EmptyGrid);
        }
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::invalid(
                "grid",
                format!("need start < end, got [{start}, {end}]"),
            ));
        }
        Ok(GridSpec { start, end, points })
    }

    pub fn centered(center: f64, half_width: f64, points: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, points)
    }

    /// Grid with spacing exactly `dx` starting at `start`, extended so that
    /// it reaches at least `end`.
    pub fn with_spacing(start: f64, end: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::invalid("dx", "must be > 0"));
        }
        let steps = ((end - start) / dx - 1e-9).ceil().max(1.0) as usize;
        Self::new(start, start + steps as f64 * dx, steps + 1)
    }

    pub fn dx(&self) -> f64 {
        (self.end - self.start) / (self.points - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dx()
    }
}

/// Non-negative values `values[k]` at `x0 + k·dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !(dx > 0.0 && dx.is_finite() && x0.is_finite()) {
            return Err(Error::invalid(
                "dx",
                format!("must be finite and > 0, got {dx}"),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(
                "values",
                format!("densities must be finite and >= 0, got {v}"),
            ));
        }
        Ok(DensityGrid { x0, dx, values })
    }

    /// Tabulates `f` on `spec`. Negative values are clamped to zero.
    pub fn from_fn<F: Fn(f64) -> f64>(spec: &GridSpec, f: F) -> Self {
        let values = (0..spec.points).map(|k| f(spec.x(k)).max(0.0)).collect();
        DensityGrid {
            x0: spec.start,
            dx: spec.dx(),
            values,
        }
    }

    /// Like [`from_fn`](Self::from_fn) for fallible, expensive point
    /// evaluations, spread over threads when `execution` allows.
    pub fn try_from_fn<F>(spec: &GridSpec, execution: Execution, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync + Send,
    {
        let values = map_indexed(spec.points, execution, |k| f(spec.x(k)))
            .into_iter()
            .map(|v| v.map(|v| v.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DensityGrid {
            x0: spec.start,
            dx: spec.dx(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.len() - 1)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            start: self.x0,
            end: self.x_end(),
            points: self.len().max(2),
        }
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.x0 <= lo && self.x_end() >= hi
    }

    /// Trapezoid integral of `g(x) · density(x)`.
    pub fn integrate_with<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let n = self.len();
        if n == 1 {
            return 0.0;
        }
        let inner: f64 = (1..n - 1).map(|k| g(self.x(k)) * self.values[k]).sum();
        let ends = 0.5 * (g(self.x0) * self.values[0] + g(self.x_end()) * self.values[n - 1]);
        (inner + ends) * self.dx
    }

    pub fn integral(&self) -> f64 {
        self.integrate_with(|_| 1.0)
    }

    pub fn moment(&self, order: i32) -> f64 {
        self.integrate_with(|x| x.powi(order))
    }

    pub fn mean(&self) -> f64 {
        self.moment(1) / self.integral()
    }

    /// Rescales to unit trapezoid integral; returns the grid and the
    /// pre-normalization deficit `1 − ∫`.
    pub fn normalized(mut self) -> (Self, f64) {
        let total = self.integral();
        if total > 0.0 {
            for v in &mut self.values {
                *v /= total;
            }
        }
        (self, 1.0 - total)
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.dx;
        let last = (self.len() - 1) as f64;
        if !(t >= 0.0 && t <= last) {
            return 0.0;
        }
        let k = (t.floor() as usize).min(self.len().saturating_sub(2));
        if self.len() == 1 {
            return self.values[0];
        }
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    /// Moves the grid origin by `delta`; values are untouched.
    pub fn shifted(&self, delta: f64) -> Self {
        DensityGrid {
            x0: self.x0 + delta,
            dx: self.dx,
            values: self.values.clone(),
        }
    }

    /// Expresses the density in units of `unit`: abscissae divided by
    /// `unit`, values multiplied by it (mass is preserved).
    pub fn rescaled(&self, unit: f64) -> Self {
        DensityGrid {
            x0: self.x0 / unit,
            dx: self.dx / unit,
            values: self.values.iter().map(|v| v * unit).collect(),
        }
    }

    /// Largest `|self(x_k) − other(x_k)|` over this grid's nodes.
    pub fn sup_distance(&self, other: &DensityGrid) -> f64 {
        (0..self.len())
            .map(|k| (self.values[k] - other.interpolate(self.x(k))).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|self(x_k) − f(x_k)|` over this grid's nodes.
    pub fn sup_distance_to<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        (0..self.len())
            .map(|k| (self.values[k] - f(self.x(k))).abs())
            .fold(0.0, f64::max)
    }

    /// Cumulative trapezoid integrals at each node, starting from zero.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..self.len() {
            acc += 0.5 * (self.values[k - 1] + self.values[k]) * self.dx;
            out.push(acc);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, metadata: &Metadata) -> Result<()> {
        let mut meta = metadata.clone();
        meta.push("x0", io::fmt_f64(self.x0));
        meta.push("dx", io::fmt_f64(self.dx));
        meta.write_to(out)?;
        writeln!(out, "x,density")?;
        for (k, &v) in self.values.iter().enumerate() {
            io::write_row(out, &[self.x(k), v])?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, metadata: &Metadata) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, metadata)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parses the CSV form; grid geometry comes from the `x0`/`dx` metadata
    /// lines when present, else from the first two abscissae.
    pub fn read_csv<R: Read>(input: R) -> Result<(Self, Metadata)> {
        let table = io::read_table(input)?;
        table.expect_header(&["x", "density"])?;
        let xs = table.column("x").unwrap_or_default();
        let values = table.column("density").unwrap_or_default();
        if xs.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let parse = |key: &str| -> Result<Option<f64>> {
            table
                .metadata
                .get(key)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("{key}: {e}")))
                })
                .transpose()
        };
        let x0 = parse("x0")?.unwrap_or(xs[0]);
        let dx = match parse("dx")? {
            Some(dx) => dx,
            None if xs.len() > 1 => xs[1] - xs[0],
            None => 1.0,
        };
        let mut metadata = table.metadata.clone();
        metadata.0.retain(|(k, _)| k != "x0" && k != "dx");
        Ok((DensityGrid::new(x0, dx, values)?, metadata))
    }
}

/// `c(w) = ∫ a(w + ε) b(ε) dε` by the trapezoid rule over `b`'s nodes.
///
/// The output grid is the set of shifts that map `b`'s nodes onto `a`'s:
/// it starts at `a.x0 − b.x_end()` and has `len(a) + len(b) − 1` nodes.
pub fn cross_correlate(a: &DensityGrid, b: &DensityGrid) -> Result<DensityGrid> {
    cross_correlate_with(a, b, Execution::default())
}

pub fn cross_correlate_with(
    a: &DensityGrid,
    b: &DensityGrid,
    execution: Execution,
) -> Result<DensityGrid> {
    if (a.dx - b.dx).abs() > SPACING_TOL * a.dx.max(b.dx) {
        return Err(Error::IncommensurateGrids {
            left: a.dx,
            right: b.dx,
        });
    }
    let na = a.len();
    let nb = b.len();
    let dx = a.dx;
    let weights: Vec<f64> = (0..nb)
        .map(|j| {
            let w = if nb > 1 && (j == 0 || j == nb - 1) {
                0.5
            } else {
                1.0
            };
            w * b.values[j] * dx
        })
        .collect();
    // Node j of `b` pairs with node i = k + j − (nb − 1) of `a`.
    let values = map_indexed(na + nb - 1, execution, |k| {
        let j_lo = (nb - 1).saturating_sub(k);
        let j_hi = nb.min(na + nb - 1 - k);
        (j_lo..j_hi)
            .map(|j| a.values[k + j + 1 - nb] * weights[j])
            .sum::<f64>()
    });
    DensityGrid::new(a.x0 - b.x_end(), dx, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(var: f64) -> impl Fn(f64) -> f64 {
        move |x| (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn trapezoid_integrates_gaussian() {
        let spec = GridSpec::centered(0.0, 12.0, 2001).unwrap();
        let g = DensityGrid::from_fn(&spec, gaussian(1.0));
        assert!((g.integral() - 1.0).abs() < 1e-12);
        assert!((g.moment(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn with_spacing_hits_exact_dx() {
        let s = GridSpec::with_spacing(-1.0, 1.0, 0.01).unwrap();
        assert_eq!(s.points, 201);
        assert!((s.dx() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_zero_outside() {
        let g = DensityGrid::new(0.0, 0.5, vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(g.interpolate(0.5), 3.0);
        assert_eq!(g.interpolate(0.25), 2.0);
        assert_eq!(g.interpolate(1.0), 2.0);
        assert_eq!(g.interpolate(-0.1), 0.0);
        assert_eq!(g.interpolate(1.1), 0.0);
    }

    #[test]
    fn rejects_negative_density() {
        assert!(DensityGrid::new(0.0, 1.0, vec![0.1, -0.1]).is_err());
        assert!(DensityGrid::new(0.0, 0.0, vec![0.1]).is_err());
    }

    #[test]
    fn cross_correlation_of_gaussians_adds_variances() {
        let spec = GridSpec::with_spacing(-10.0, 10.0, 0.01).unwrap();
        let a = DensityGrid::from_fn(&spec, gaussian(1.0));
        let b = DensityGrid::from_fn(&spec, gaussian(1.0));
        let c = cross_correlate(&a, &b).unwrap();
        assert!((c.integral() - 1.0).abs() < 1e-10);
        assert!(c.sup_distance_to(gaussian(2.0)) < 1e-10);
    }

    #[test]
    fn cross_correlation_with_near_delta_shifts() {
        let spec = GridSpec::with_spacing(-8.0, 8.0, 0.01).unwrap();
        let a = DensityGrid::from_fn(&spec, gaussian(1.0));
        // Unit mass on the node at 1.5.
        let k = ((1.5 - spec.start) / spec.dx()).round() as usize;
        let mut delta = vec![0.0; spec.points];
        delta[k] = 1.0 / spec.dx();
        let b = DensityGrid::new(spec.start, spec.dx(), delta).unwrap();
        let c = cross_correlate(&a, &b).unwrap();
        // c(w) = a(w + 1.5)
        let f = gaussian(1.0);
        assert!(
            c.sup_distance_to(|w| if w + 1.5 >= -8.0 && w + 1.5 <= 8.0 {
                f(w + 1.5)
            } else {
                0.0
            }) < 1e-12
        );
    }

    #[test]
    fn cross_correlation_preserves_mass() {
        let a = DensityGrid::new(0.0, 0.1, vec![0.0, 1.0, 3.0, 2.0, 0.0]).unwrap();
        let b = DensityGrid::new(-1.0, 0.1, vec![0.0, 2.0, 5.0, 0.0]).unwrap();
        let c = cross_correlate(&a, &b).unwrap();
        assert!((c.integral() - a.integral() * b.integral()).abs() < 1e-12);
    }

    #[test]
    fn incommensurate_grids_rejected() {
        let a = DensityGrid::new(0.0, 0.1, vec![1.0; 4]).unwrap();
        let b = DensityGrid::new(0.0, 0.2, vec![1.0; 4]).unwrap();
        assert!(matches!(
            cross_correlate(&a, &b),
            Err(Error::IncommensurateGrids { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let spec = GridSpec::new(-3.0, 3.0, 61).unwrap();
        let g = DensityGrid::from_fn(&spec, gaussian(0.7));
        let meta = Metadata::new().with("scaling", "x = w/sigma_i");
        let text = g.to_csv_string(&meta);
        let (parsed, parsed_meta) = DensityGrid::read_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed, g);
        assert_eq!(parsed.to_csv_string(&parsed_meta), text);
    }
}
