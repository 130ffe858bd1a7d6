//! Coherent point drift, nonrigid variant (Gaussian-mixture EM with a
//! Gaussian motion-coherence prior).
//!
//! The M-step is solved in the symmetric form
//! `(S G S + λσ² I) V = S⁻¹ (P X − diag(P1) Y)`, `W = S V`, `S = diag(P1)^½`,
//! which is positive definite for every σ² > 0.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::registration::DEFAULT_SEED;
use crate::{Error, Point3, Result, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpdParams {
    /// Gaussian kernel width in normalized units.
    pub beta: f64,
    /// Motion-coherence regularization weight.
    pub lambda: f64,
    /// Uniform outlier weight `w` in `[0, 1)`.
    pub outlier_weight: f64,
    pub max_iterations: usize,
    pub sigma2_tol: f64,
    /// Per-side cap on point count when registering meshes.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for CpdParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            lambda: 3.0,
            outlier_weight: 0.1,
            max_iterations: 150,
            sigma2_tol: 1e-8,
            max_points: 3000,
            seed: DEFAULT_SEED,
        }
    }
}

impl CpdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.lambda > 0.0) {
            return Err(Error::invalid("CPD beta and lambda must be positive"));
        }
        if !(0.0..1.0).contains(&self.outlier_weight) {
            return Err(Error::invalid(format!("CPD outlier weight {} must be in [0, 1)", self.outlier_weight)));
        }
        if !(self.sigma2_tol > 0.0) || self.max_iterations == 0 || self.max_points < 10 {
            return Err(Error::invalid("CPD needs a positive tolerance, iterations and at least 10 points"));
        }
        Ok(())
    }
}

/// Offsets and scales mapping each point set to zero mean / unit RMS radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub source_mean: Vector3,
    pub source_scale: f64,
    pub target_mean: Vector3,
    pub target_scale: f64,
}

fn centre_and_scale(points: &[Point3]) -> (Vector3, f64) {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let ms = points.iter().map(|p| (p.coords - mean).norm_squared()).sum::<f64>() / n;
    (mean, ms.sqrt())
}

/// Learned displacement field. Maps source-frame millimetres to target-frame
/// millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    /// Kernel centres in the normalized source frame.
    source_points: Vec<Vector3>,
    /// Kernel weights, one row per centre.
    weights: Vec<Vector3>,
    beta: f64,
    normalization: Normalization,
    registered: Vec<Point3>,
    sigma2_history: Vec<f64>,
}

impl DeformationField {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// Kernel centres in the normalized source frame.
    pub fn source_points(&self) -> &[Vector3] {
        &self.source_points
    }

    pub fn weights(&self) -> &[Vector3] {
        &self.weights
    }

    /// Source points moved by the field, in target millimetres.
    pub fn registered_points(&self) -> &[Point3] {
        &self.registered
    }

    pub fn sigma2_history(&self) -> &[f64] {
        &self.sigma2_history
    }

    pub fn iterations(&self) -> usize {
        self.sigma2_history.len().saturating_sub(1)
    }

    fn eval_normalized(&self, y: &Vector3) -> Vector3 {
        let k = -1.0 / (2.0 * self.beta * self.beta);
        let mut out = *y;
        for (c, w) in self.source_points.iter().zip(&self.weights) {
            out += w * ((y - c).norm_squared() * k).exp();
        }
        out
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let n = &self.normalization;
        let y = (p.coords - n.source_mean) / n.source_scale;
        Point3::from(self.eval_normalized(&y) * n.target_scale + n.target_mean)
    }

    pub fn apply_all(&self, points: &[Point3]) -> Vec<Point3> {
        points.par_iter().map(|p| self.apply(p)).collect()
    }

    /// Plain-text form:
    ///
    /// ```text
    /// cpd-deformation-field 1
    /// beta <f64>
    /// source_mean <x> <y> <z>
    /// source_scale <f64>
    /// target_mean <x> <y> <z>
    /// target_scale <f64>
    /// centres <M>
    /// <yx> <yy> <yz> <wx> <wy> <wz>     (M lines, normalized frame)
    /// ```
    ///
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_text(&self) -> String {
        let n = &self.normalization;
        let v = |v: &Vector3| format!("{:e} {:e} {:e}", v.x, v.y, v.z);
        let mut s = String::new();
        let _ = writeln!(s, "cpd-deformation-field 1");
        let _ = writeln!(s, "beta {:e}", self.beta);
        let _ = writeln!(s, "source_mean {}", v(&n.source_mean));
        let _ = writeln!(s, "source_scale {:e}", n.source_scale);
        let _ = writeln!(s, "target_mean {}", v(&n.target_mean));
        let _ = writeln!(s, "target_scale {:e}", n.target_scale);
        let _ = writeln!(s, "centres {}", self.source_points.len());
        for (c, w) in self.source_points.iter().zip(&self.weights) {
            let _ = writeln!(s, "{} {}", v(c), v(w));
        }
        s
    }

    /// Parses [`Self::to_text`] output. Registered points and the σ² trace
    /// are recomputed and left empty respectively.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut offset = 0;
        let mut lines = text.split_inclusive('\n').map(|l| {
            let start = offset;
            offset += l.len();
            (start, l.trim())
        });
        let mut field = |key: &str, count: usize| -> Result<(usize, Vec<f64>)> {
            let (at, line) = lines.next().ok_or_else(|| Error::parse(text.len(), format!("missing '{key}' line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::parse(at, format!("expected '{key}'")));
            }
            let vals: Vec<f64> = parts
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(at, format!("bad number '{t}'"))))
                .collect::<Result<_>>()?;
            if vals.len() != count {
                return Err(Error::parse(at, format!("'{key}' needs {count} values")));
            }
            Ok((at, vals))
        };
        let (at, version) = field("cpd-deformation-field", 1)?;
        if version[0] != 1.0 {
            return Err(Error::parse(at, format!("unsupported field version {}", version[0])));
        }
        let beta = field("beta", 1)?.1[0];
        let sm = field("source_mean", 3)?.1;
        let ss = field("source_scale", 1)?.1[0];
        let tm = field("target_mean", 3)?.1;
        let ts = field("target_scale", 1)?.1[0];
        let m = field("centres", 1)?.1[0] as usize;
        let mut source_points = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for _ in 0..m {
            let (at, line) = lines.next().ok_or_else(|| Error::parse(text.len(), "truncated centre list"))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(at, format!("bad number '{t}'"))))
                .collect::<Result<_>>()?;
            if v.len() != 6 {
                return Err(Error::parse(at, "centre line needs 6 values"));
            }
            source_points.push(Vector3::new(v[0], v[1], v[2]));
            weights.push(Vector3::new(v[3], v[4], v[5]));
        }
        if !(beta > 0.0 && ss > 0.0 && ts > 0.0) {
            return Err(Error::parse(0, "beta and scales must be positive"));
        }
        let mut f = DeformationField {
            source_points,
            weights,
            beta,
            normalization: Normalization {
                source_mean: Vector3::new(sm[0], sm[1], sm[2]),
                source_scale: ss,
                target_mean: Vector3::new(tm[0], tm[1], tm[2]),
                target_scale: ts,
            },
            registered: Vec::new(),
            sigma2_history: Vec::new(),
        };
        let n = f.normalization;
        f.registered = f
            .source_points
            .iter()
            .map(|y| Point3::from(y * n.source_scale + n.source_mean))
            .collect();
        f.registered = f.apply_all(&f.registered);
        Ok(f)
    }
}

fn numeric(iteration: usize, what: &str) -> Error {
    Error::NumericFailure {
        iteration,
        message: format!("non-finite {what}"),
    }
}

/// Nonrigid CPD of `source` (moving, M points) onto `target` (N points).
pub fn cpd_nonrigid(source: &[Point3], target: &[Point3], params: &CpdParams) -> Result<DeformationField> {
    params.validate()?;
    if source.len() < 10 || target.len() < 10 {
        return Err(Error::invalid(format!(
            "CPD needs at least 10 points per set (got {} and {})",
            source.len(),
            target.len()
        )));
    }
    if source.iter().chain(target).any(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid("CPD input contains non-finite coordinates"));
    }
    let (ym, ys) = centre_and_scale(source);
    let (xm, xs) = centre_and_scale(target);
    if !(ys > 0.0) || !(xs > 0.0) {
        return Err(Error::DegenerateConfiguration("CPD point set collapses to a single point".into()));
    }
    let y: Vec<Vector3> = source.iter().map(|p| (p.coords - ym) / ys).collect();
    let x: Vec<Vector3> = target.iter().map(|p| (p.coords - xm) / xs).collect();
    let (m, n) = (y.len(), x.len());
    let d = 3.0;

    let g = {
        let k = -1.0 / (2.0 * params.beta * params.beta);
        DMatrix::from_fn(m, m, |i, j| ((y[i] - y[j]).norm_squared() * k).exp())
    };

    let mut sigma2 = {
        let sx: f64 = x.iter().map(|v| v.norm_squared()).sum();
        let sy: f64 = y.iter().map(|v| v.norm_squared()).sum();
        let cx = x.iter().fold(Vector3::zeros(), |a, v| a + v);
        let cy = y.iter().fold(Vector3::zeros(), |a, v| a + v);
        (m as f64 * sx + n as f64 * sy - 2.0 * cx.dot(&cy)) / (d * m as f64 * n as f64)
    };
    let w_out = params.outlier_weight;
    let mut w = DMatrix::<f64>::zeros(m, 3);
    let mut t: Vec<Vector3> = y.clone();
    let mut history = vec![sigma2];
    let mut kernel = vec![0.0; m * n];

    for iteration in 1..=params.max_iterations {
        // E-step. Rows are independent, so the parallel fill is deterministic.
        let inv = -1.0 / (2.0 * sigma2);
        kernel.par_chunks_mut(n).zip(t.par_iter()).for_each(|(row, tm)| {
            for (k, xn) in row.iter_mut().zip(&x) {
                *k = ((xn - tm).norm_squared() * inv).exp();
            }
        });
        let c = (2.0 * std::f64::consts::PI * sigma2).powf(d / 2.0) * w_out / (1.0 - w_out) * m as f64 / n as f64;
        let mut denom = vec![c; n];
        for row in kernel.chunks(n) {
            for (dn, k) in denom.iter_mut().zip(row) {
                *dn += k;
            }
        }
        let inv_denom: Vec<f64> = denom.iter().map(|v| if *v > 0.0 { 1.0 / v } else { 0.0 }).collect();
        let (p1, px): (Vec<f64>, Vec<Vector3>) = kernel
            .par_chunks(n)
            .map(|row| {
                let mut s = 0.0;
                let mut v = Vector3::zeros();
                for ((k, id), xn) in row.iter().zip(&inv_denom).zip(&x) {
                    let p = k * id;
                    s += p;
                    v += xn * p;
                }
                (s, v)
            })
            .unzip();
        let mut pt1 = vec![0.0; n];
        for row in kernel.chunks(n) {
            for ((a, k), id) in pt1.iter_mut().zip(row).zip(&inv_denom) {
                *a += k * id;
            }
        }
        let np: f64 = p1.iter().sum();
        if !np.is_finite() || !(np > 0.0) {
            return Err(Error::NumericFailure {
                iteration,
                message: format!("posterior mass {np} vanished"),
            });
        }

        // M-step in symmetric form.
        let s: Vec<f64> = p1.iter().map(|v| v.sqrt()).collect();
        let mut a = DMatrix::from_fn(m, m, |i, j| s[i] * g[(i, j)] * s[j]);
        for i in 0..m {
            a[(i, i)] += params.lambda * sigma2;
        }
        let rhs = DMatrix::from_fn(m, 3, |i, k| {
            if s[i] > 0.0 {
                (px[i][k] - p1[i] * y[i][k]) / s[i]
            } else {
                0.0
            }
        });
        let chol = a.cholesky().ok_or_else(|| Error::NumericFailure {
            iteration,
            message: "regularized system is not positive definite".into(),
        })?;
        let v = chol.solve(&rhs);
        w = DMatrix::from_fn(m, 3, |i, k| s[i] * v[(i, k)]);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(numeric(iteration, "kernel weights"));
        }
        let gw = &g * &w;
        t = (0..m).map(|i| y[i] + Vector3::new(gw[(i, 0)], gw[(i, 1)], gw[(i, 2)])).collect();

        let xpx: f64 = x.iter().zip(&pt1).map(|(v, p)| p * v.norm_squared()).sum();
        let pxt: f64 = px.iter().zip(&t).map(|(a, b)| a.dot(b)).sum();
        let tpt: f64 = t.iter().zip(&p1).map(|(v, p)| p * v.norm_squared()).sum();
        let previous = sigma2;
        sigma2 = (xpx - 2.0 * pxt + tpt) / (np * d);
        if !sigma2.is_finite() {
            return Err(numeric(iteration, "sigma²"));
        }
        if sigma2 <= 0.0 {
            sigma2 = params.sigma2_tol / 10.0;
        }
        history.push(sigma2);
        if (previous - sigma2).abs() < params.sigma2_tol {
            break;
        }
    }

    let weights: Vec<Vector3> = (0..m).map(|i| Vector3::new(w[(i, 0)], w[(i, 1)], w[(i, 2)])).collect();
    let registered = t.iter().map(|v| Point3::from(v * xs + xm)).collect();
    Ok(DeformationField {
        source_points: y,
        weights,
        beta: params.beta,
        normalization: Normalization {
            source_mean: ym,
            source_scale: ys,
            target_mean: xm,
            target_scale: xs,
        },
        registered,
        sigma2_history: history,
    })
}
