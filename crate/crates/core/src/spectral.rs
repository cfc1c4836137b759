//! Truncations of the generator `A = B + K` of the time-changed linear system
//! and its dominant eigenpair.
//!
//! `B` is lower bidiagonal (`−q0 w(k)` on the diagonal, `q0 w(k)` feeding
//! class `k+1`) and `K` is the rank-one first row `p0 w(k)`. Vectors are
//! measured in the lattice norm `‖x‖ = Σ k |x_k|`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{bracket, product_series, ModelParams};
use crate::error::{Error, Result};

/// What happens to the flow out of the last retained class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TailClosure {
    /// Class `K` keeps its outflow `−q0 w(K)`; that mass leaves the system.
    #[default]
    Open,
    /// Class `K` has no outflow and collects everything that reaches it.
    Absorbing,
}

#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    dim: usize,
    /// Diagonal of `B`.
    diagonal: Vec<f64>,
    /// `subdiagonal[k-1]` is the rate from class `k` into class `k+1`.
    subdiagonal: Vec<f64>,
    /// The `K` part: `p0 w(k)`.
    first_row: Vec<f64>,
    norm_weights: Vec<f64>,
    /// `q0 w(K)`, the rate at which the infinite operator moves class `K` on.
    outflow: f64,
    closure: TailClosure,
    shift: f64,
}

pub fn build_operator(params: &ModelParams, dim: usize) -> Result<TruncatedOperator> {
    build_operator_with(params, dim, TailClosure::Open)
}

pub fn build_operator_with(
    params: &ModelParams,
    dim: usize,
    closure: TailClosure,
) -> Result<TruncatedOperator> {
    if dim < 2 {
        return Err(Error::config("kmax", "operator truncation needs K ≥ 2"));
    }
    params.require_certified()?;
    let w = params.weight().values(dim);
    let (p0, q0) = (params.p0(), params.q0());
    let mut diagonal: Vec<f64> = w.iter().map(|wk| -q0 * wk).collect();
    if closure == TailClosure::Absorbing {
        diagonal[dim - 1] = 0.0;
    }
    Ok(TruncatedOperator {
        dim,
        diagonal,
        subdiagonal: w[..dim - 1].iter().map(|wk| q0 * wk).collect(),
        first_row: w.iter().map(|wk| p0 * wk).collect(),
        norm_weights: (1..=dim).map(|k| k as f64).collect(),
        outflow: q0 * w[dim - 1],
        closure,
        shift: q0 * params.weight().sup_ratio() * dim as f64,
    })
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn closure(&self) -> TailClosure {
        self.closure
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn subdiagonal(&self) -> &[f64] {
        &self.subdiagonal
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    /// Shift used by the power iteration, `q0 𝒲 K`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Entry `A[i][j]`, zero-based.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut v = 0.0;
        if i == 0 {
            v += self.first_row[j];
        }
        if i == j {
            v += self.diagonal[i];
        }
        if i == j + 1 {
            v += self.subdiagonal[j];
        }
        v
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.norm_weights).map(|(v, k)| k * v.abs()).sum()
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let mut head = 0.0;
        for (r, v) in self.first_row.iter().zip(x) {
            head += r * v;
        }
        out[0] = self.diagonal[0] * x[0] + head;
        for k in 1..self.dim {
            out[k] = self.diagonal[k] * x[k] + self.subdiagonal[k - 1] * x[k - 1];
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.matvec_into(x, &mut out);
        out
    }

    /// Action of the untruncated operator on a vector supported on `1..=K`:
    /// `K + 1` entries, the last being the flow `q0 w(K) x_K` out of class `K`.
    pub fn apply_untruncated(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.matvec(x);
        let last = self.dim - 1;
        if self.closure == TailClosure::Absorbing {
            out[last] -= self.outflow * x[last];
        }
        out.push(self.outflow * x[last]);
        out
    }
}

/// Solves `λ = (p0 − q0) w(1) + p0 w(1) Σ_{k≥2} Π_{r=2..k} q0 w(r)/(λ + q0 w(r))`
/// by bisection; the right side decreases in λ and the left side increases.
pub fn lambda_from_scalar_equation(params: &ModelParams, tol: f64) -> Result<f64> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::config("tol", "tolerance must be positive"));
    }
    params.require_certified()?;
    let (p0, q0) = (params.p0(), params.q0());
    let w1 = params.weight().at(1);
    let series_tol = (tol * 1e-2 / (p0 * w1)).max(1e-16);
    let gap = |lambda: f64| -> Result<f64> {
        let s = product_series(params, lambda, 1, series_tol)?;
        Ok((p0 - q0) * w1 + p0 * w1 * s.sum - lambda)
    };
    let (mut lo, mut hi) = bracket(gap)?;
    for _ in 0..2000 {
        if hi - lo <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let g = gap(mid)?;
        if g == 0.0 {
            return Ok(mid);
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Positive, `‖x‖ = 1` in the lattice norm.
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖A x − λ x‖` over rows `1..K−1`.
    pub residual: f64,
    /// `|(A x − λ x)_K|`, the truncation row.
    pub boundary_residual: f64,
    /// Largest relative deviation of `x_k / x_1` from the product formula,
    /// over the numerically resolved components.
    pub closed_form_deviation: f64,
    /// Number of components entering `closed_form_deviation`.
    pub resolved: usize,
}

pub const MAX_POWER_ITERATIONS: usize = 1_000_000;
/// Components below this fraction of the largest one are not resolved in
/// double precision and are excluded from componentwise checks.
pub const RESOLUTION: f64 = 1e-12;
const CHECK_EVERY: usize = 64;

/// Shifted power iteration on `A + σ I` with `σ = q0 𝒲 K`, normalised in the
/// lattice norm.
pub fn dominant_eigenpair(op: &TruncatedOperator, tol: f64) -> Result<EigenPair> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::config("tol", "tolerance must be positive"));
    }
    let n = op.dim;
    let sigma = op.shift;
    let mut x: Vec<f64> = vec![1.0; n];
    let nx = op.norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut snapshot = x.clone();
    let mut last_lambda = f64::NAN;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_POWER_ITERATIONS {
        op.matvec_into(&x, &mut y);
        for (yk, xk) in y.iter_mut().zip(&x) {
            *yk += sigma * xk;
        }
        let ny = op.norm(&y);
        if !(ny.is_finite() && ny > 0.0) {
            return Err(Error::Spectral("power iteration collapsed".into()));
        }
        for (xk, yk) in x.iter_mut().zip(&y) {
            *xk = yk / ny;
        }
        iterations += 1;

        if iterations % CHECK_EVERY == 0 {
            let lambda = rayleigh(op, &x);
            let change = relative_change(&snapshot, &x).max((lambda - last_lambda).abs());
            // Contraction per block estimated from consecutive changes.
            let q = (change / last_change).min(0.999_999);
            let err = if q > 0.0 { change * q / (1.0 - q) } else { change };
            if change.is_finite() && (err <= tol || change <= 1e-14) {
                converged = true;
                break;
            }
            last_change = change;
            last_lambda = lambda;
            snapshot.copy_from_slice(&x);
        }
    }
    if !converged {
        return Err(Error::Spectral(format!(
            "power iteration did not converge in {MAX_POWER_ITERATIONS} iterations"
        )));
    }
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::Truncation(
            "dominant eigenvector has negative entries; increase K".into(),
        ));
    }
    let lambda = rayleigh(op, &x);

    let ax = op.matvec(&x);
    let mut residual = 0.0;
    for k in 0..n - 1 {
        residual += (k + 1) as f64 * (ax[k] - lambda * x[k]).abs();
    }
    let boundary_residual = (ax[n - 1] - lambda * x[n - 1]).abs();

    // The product formula holds on every row but the truncation row for the
    // absorbing closure.
    let checked = match op.closure {
        TailClosure::Open => n,
        TailClosure::Absorbing => n - 1,
    };
    let cf = product_formula(op, lambda, checked);
    let xmax = x.iter().cloned().fold(0.0, f64::max);
    let mut dev = 0.0f64;
    let mut resolved = 0;
    for k in 0..checked {
        if x[k] >= RESOLUTION * xmax {
            dev = dev.max((x[k] / x[0] / cf[k] - 1.0).abs());
            resolved += 1;
        }
    }
    if dev > 1e-8 {
        return Err(Error::Spectral(format!(
            "eigenvector deviates from the product formula by {dev:e}"
        )));
    }

    Ok(EigenPair {
        lambda,
        x,
        iterations,
        residual,
        boundary_residual,
        closed_form_deviation: dev,
        resolved,
    })
}

/// `x_k / x_1 = Π_{r=2..k} q0 w(r−1) / (λ + q0 w(r))`, built from the
/// operator's own rates.
fn product_formula(op: &TruncatedOperator, lambda: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    out.push(1.0);
    for k in 1..len {
        // sub[k-1] = q0 w(k) (one-based k), outflow of class k+1 is q0 w(k+1)
        let q0w_next = if k == op.dim - 1 { op.outflow } else { op.subdiagonal[k] };
        let prev = out[k - 1];
        out.push(prev * op.subdiagonal[k - 1] / (lambda + q0w_next));
    }
    out
}

/// `λ ≈ ⟨k, A x⟩ / ⟨k, x⟩` for a positive `x`.
fn rayleigh(op: &TruncatedOperator, x: &[f64]) -> f64 {
    let ax = op.matvec(x);
    let num: f64 = ax.iter().zip(&op.norm_weights).map(|(v, k)| k * v).sum();
    let den: f64 = x.iter().zip(&op.norm_weights).map(|(v, k)| k * v).sum();
    num / den
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    let xmax = new.iter().cloned().fold(0.0, f64::max);
    old.iter()
        .zip(new)
        .filter(|(_, n)| **n >= RESOLUTION * xmax)
        .map(|(o, n)| ((n - o) / n).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjointVector {
    pub lambda: f64,
    /// `x*_1 = 1`.
    pub x: Vec<f64>,
    /// Relative residuals of the adjoint recursion for `k = 1..K−1`.
    pub recursion_residuals: Vec<f64>,
    pub max_residual: f64,
    /// `max_j x*_j / j`.
    pub growth_constant: f64,
}

/// Positive eigenvector of `A*` at `λ = s*`.
///
/// With `ρ_k = q0 w(k)/(λ + q0 w(k))`, iterating the adjoint recursion
/// `x*_k = ρ_k x*_{k+1} + p0 w(k) x*_1 / (λ + q0 w(k))` gives
///
/// ```text
/// x*_j = x*_1 w(j)/(λ + q0 w(j)) · [ q0 Σ_{k≥j} p0 w(k+1)/(λ + q0 w(k+1)) Π_{r=j+1..k} ρ_r + p0 ]
///      = x*_1 (p0/q0) ρ_j (1 + Σ_{m≥1} Π_{i=1..m} ρ_{j+i}),
/// ```
///
/// where the tail term vanishes because `F(s*) = 1`.
pub fn adjoint_eigenvector(params: &ModelParams, s_star: f64, dim: usize) -> Result<AdjointVector> {
    if dim < 2 {
        return Err(Error::config("kmax", "adjoint truncation needs K ≥ 2"));
    }
    if !(s_star.is_finite() && s_star > 0.0) {
        return Err(Error::Domain(format!("s* must be positive, got {s_star}")));
    }
    params.require_certified()?;
    let (p0, q0) = (params.p0(), params.q0());
    let w = params.weight();
    let lambda = s_star;
    let mut x = Vec::with_capacity(dim);
    x.push(1.0);
    for j in 2..=dim as u64 {
        let rho = params.rho(lambda, j);
        let lead = p0 / q0 * rho;
        let series = product_series(params, lambda, j, 1e-16)?;
        x.push(lead * (1.0 + series.sum));
    }
    let mut residuals = Vec::with_capacity(dim - 1);
    for k in 1..dim as u64 {
        let wk = w.at(k);
        let denom = lambda + q0 * wk;
        let rhs = q0 * wk * x[k as usize] / denom + p0 * wk * x[0] / denom;
        let xk = x[k as usize - 1];
        residuals.push(((xk - rhs) / xk).abs());
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    if max_residual > 1e-8 {
        return Err(Error::Truncation(format!(
            "adjoint recursion residual {max_residual:e} exceeds 1e-8"
        )));
    }
    let growth_constant = x
        .iter()
        .enumerate()
        .map(|(i, v)| v / (i + 1) as f64)
        .fold(0.0, f64::max);
    Ok(AdjointVector {
        lambda,
        x,
        recursion_residuals: residuals,
        max_residual,
        growth_constant,
    })
}

/// `|⟨x*, A x⟩ − s* ⟨x*, x⟩| / (s* ⟨x*, x⟩)` with `A` acting untruncated on
/// the finitely supported `x`. `x` has `op.dim()` entries and `x_star` at
/// least one more.
pub fn adjoint_pairing_residual(
    op: &TruncatedOperator,
    s_star: f64,
    x_star: &[f64],
    x: &[f64],
) -> Result<f64> {
    if x.len() != op.dim {
        return Err(Error::Input(format!(
            "vector has {} entries, operator has K = {}",
            x.len(),
            op.dim
        )));
    }
    if x_star.len() < x.len() + 1 {
        return Err(Error::Input(
            "adjoint vector must extend one class past the eigenvector".into(),
        ));
    }
    let ax = op.apply_untruncated(x);
    let lhs: f64 = ax.iter().zip(x_star).map(|(a, b)| a * b).sum();
    let pair: f64 = x.iter().zip(x_star).map(|(a, b)| a * b).sum();
    Ok((lhs - s_star * pair).abs() / (s_star * pair).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{a_sequence, solve_s_star, Model};
    use crate::weights::WeightFunction;

    fn params(model: Model, p: f64, kappa: f64) -> ModelParams {
        ModelParams::new(model, p, WeightFunction::power(kappa).unwrap()).unwrap()
    }

    #[test]
    fn operator_entries_small() {
        let op = build_operator(&params(Model::Graph, 1.0, 0.0), 2).unwrap();
        assert_eq!(op.dense(), vec![vec![0.0, 1.0], vec![1.0, -1.0]]);

        let op = build_operator(&params(Model::Urn, 0.5, 0.0), 3).unwrap();
        let a = op.dense();
        assert_eq!(a[0], vec![0.0, 0.5, 0.5]);
        assert_eq!((a[1][0], a[2][1]), (0.5, 0.5));
        assert_eq!((a[0][0], a[1][1], a[2][2]), (0.0, -0.5, -0.5));
    }

    #[test]
    fn matvec_on_unit_vector_is_column() {
        let op = build_operator(&params(Model::Graph, 0.4, 0.5), 6).unwrap();
        let dense = op.dense();
        for j in 0..6 {
            let mut e = vec![0.0; 6];
            e[j] = 1.0;
            let col = op.matvec(&e);
            for i in 0..6 {
                assert_eq!(col[i], dense[i][j]);
            }
        }
    }

    #[test]
    fn operator_sign_structure() {
        let op = build_operator(&params(Model::Urn, 0.3, 0.5), 20).unwrap();
        let a = op.dense();
        for i in 0..20 {
            for j in 0..20 {
                if i != j {
                    assert!(a[i][j] >= 0.0);
                }
            }
        }
        // B columns: outflow of class k is exactly its inflow into k+1.
        for k in 0..19 {
            assert_eq!(op.diagonal()[k] + op.subdiagonal()[k], 0.0);
        }
    }

    #[test]
    fn scalar_lambda_uniform() {
        let l = lambda_from_scalar_equation(&params(Model::Graph, 1.0, 0.0), 1e-12).unwrap();
        assert!((l - 1.0).abs() < 1e-11);
        let l = lambda_from_scalar_equation(&params(Model::Urn, 0.3, 0.0), 1e-12).unwrap();
        assert!((l - 0.3).abs() < 1e-11);
    }

    #[test]
    fn scalar_lambda_matches_s_star() {
        for kappa in [-0.5, 0.0, 0.5] {
            let prm = params(Model::Graph, 0.6, kappa);
            let tol = 1e-11;
            let l = lambda_from_scalar_equation(&prm, tol).unwrap();
            let s = solve_s_star(&prm, tol).unwrap();
            assert!((l - s).abs() <= 2.0 * tol, "κ={kappa}: {l} vs {s}");
        }
    }

    #[test]
    fn two_by_two_truncation() {
        let op = build_operator(&params(Model::Graph, 1.0, 0.0), 2).unwrap();
        let e = dominant_eigenpair(&op, 1e-13).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((e.lambda - golden).abs() < 1e-10, "{}", e.lambda);
    }

    #[test]
    fn uniform_graph_eigenpair() {
        let prm = params(Model::Graph, 1.0, 0.0);
        let op = build_operator(&prm, 60).unwrap();
        let e = dominant_eigenpair(&op, 1e-12).unwrap();
        assert!((e.lambda - 1.0).abs() < 1e-8);
        for k in 1..40 {
            let ratio = e.x[k] / e.x[0];
            assert!((ratio - 0.5f64.powi(k as i32)).abs() < 1e-8 * 0.5f64.powi(k as i32));
        }
        assert!(e.x.iter().all(|&v| v > 0.0));
        assert!((op.norm(&e.x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_urn_eigenpair() {
        let prm = params(Model::Urn, 0.5, 0.0);
        let op = build_operator(&prm, 60).unwrap();
        let e = dominant_eigenpair(&op, 1e-12).unwrap();
        assert!((e.lambda - 0.5).abs() < 1e-8);
        for k in 1..40 {
            let ratio = e.x[k] / e.x[0];
            assert!((ratio / 0.5f64.powi(k as i32) - 1.0).abs() < 1e-8);
        }
        assert!(e.residual <= 1e-10);
    }

    #[test]
    fn lambda_increases_with_truncation() {
        let prm = params(Model::Graph, 0.3, 0.5);
        let s = solve_s_star(&prm, 1e-12).unwrap();
        let mut prev_l = f64::NEG_INFINITY;
        let mut prev_gap = f64::INFINITY;
        for k in [25, 50, 100, 200, 400] {
            let l = dominant_eigenpair(&build_operator(&prm, k).unwrap(), 1e-12)
                .unwrap()
                .lambda;
            assert!(l > prev_l && l < s + 1e-9);
            let gap = s - l;
            assert!(gap < prev_gap);
            prev_l = l;
            prev_gap = gap;
        }
    }

    #[test]
    fn adjoint_uniform_graph_is_constant() {
        let prm = params(Model::Graph, 1.0, 0.0);
        let adj = adjoint_eigenvector(&prm, 1.0, 51).unwrap();
        for v in &adj.x {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(adj.recursion_residuals[..50].iter().all(|r| *r < 1e-10));
    }

    #[test]
    fn adjoint_positive_and_linear_growth() {
        for &(model, p, kappa) in &[(Model::Urn, 0.3, 0.5), (Model::Graph, 0.3, -0.5)] {
            let prm = params(model, p, kappa);
            let s = solve_s_star(&prm, 1e-13).unwrap();
            let adj = adjoint_eigenvector(&prm, s, 300).unwrap();
            assert!(adj.x.iter().all(|&v| v > 0.0));
            assert!(adj.max_residual < 1e-8);
            assert!(adj.growth_constant.is_finite());
        }
    }

    #[test]
    fn adjoint_pairing() {
        let prm = params(Model::Urn, 0.5, 0.5);
        let s = solve_s_star(&prm, 1e-13).unwrap();
        let op = build_operator(&prm, 120).unwrap();
        let e = dominant_eigenpair(&op, 1e-12).unwrap();
        let adj = adjoint_eigenvector(&prm, s, 121).unwrap();
        let r = adjoint_pairing_residual(&op, s, &adj.x, &e.x).unwrap();
        assert!(r < 1e-8, "{r}");
        // the pairing identity holds for any finitely supported vector
        let sol = a_sequence(&prm, s, 120).unwrap();
        let r = adjoint_pairing_residual(&op, s, &adj.x, &sol.a).unwrap();
        assert!(r < 1e-8, "{r}");
    }
}
