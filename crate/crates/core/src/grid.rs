//! Phase-space discretization: radial finite-volume cells, Gauss–Legendre
//! direction cosines, geometrically spaced energy groups, and the field
//! containers defined on them.
//!
//! The angular quadrature is the backbone of every verification identity in
//! this crate: a rule with `n` nodes integrates polynomials up to degree
//! 2n−1 exactly, so moments such as (1/2)∫ mu^2 dmu = 1/3 hold to round-off
//! and the collision/transport identities inherit that exactness.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Default geometric spacing ratio between adjacent energy groups.
pub const DEFAULT_OMEGA_RATIO: f64 = 1.3;

/// Gauss–Legendre quadrature on [-1, 1]: direction cosines and weights.
///
/// Nodes are stored in ascending order and are exactly symmetric about 0
/// (bit-for-bit), so odd moments of symmetric integrands cancel pairwise.
#[derive(Debug, Clone)]
pub struct AngularRule {
    mu: Vec<f64>,
    w: Vec<f64>,
}

impl AngularRule {
    /// Direction cosines, ascending.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Quadrature weights; they sum to 2 within round-off.
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Evaluate P_n(x) and its derivative by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0; // P_0
    let mut p = x; // P_1
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = if n == 0 {
        0.0
    } else {
        (n as f64) * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Build the n-point Gauss–Legendre rule by Newton iteration on the roots of
/// the Legendre polynomial. Requires n >= 2 so that second moments are exact.
pub fn gauss_legendre_rule(n: usize) -> Result<AngularRule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "angular rule needs at least 2 nodes, got {n}"
        )));
    }
    let mut mu = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = (n + 1) / 2;
    for i in 0..half {
        // Tricomi's estimate for the i-th root counted from mu = +1.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == half - 1 {
            x = 0.0; // middle root of an odd-order polynomial is exact
        } else {
            for _ in 0..100 {
                let (p, dp) = legendre_pair(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-15 {
                    break;
                }
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let weight = 2.0 / ((1.0 - x * x) * dp * dp);
        // Mirror instead of recomputing: enforces exact node symmetry.
        mu[n - 1 - i] = x;
        mu[i] = -x;
        w[n - 1 - i] = weight;
        w[i] = weight;
    }
    Ok(AngularRule { mu, w })
}

/// Which power of mu weights an angular moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    Zeroth,
    First,
    Second,
}

/// (1/2) Σ_k w_k f(mu_k) mu_k^p — the discrete angular mean, flux, or
/// pressure moment of a single ordinate slice.
pub fn angular_moment(values: &[f64], order: MomentOrder, rule: &AngularRule) -> Result<f64> {
    if values.len() != rule.len() {
        return Err(Error::InvalidArgument(format!(
            "ordinate slice has {} entries but the rule has {} nodes",
            values.len(),
            rule.len()
        )));
    }
    let mut acc = 0.0;
    for ((&f, &mu), &w) in values.iter().zip(rule.mu()).zip(rule.w()) {
        let p = match order {
            MomentOrder::Zeroth => 1.0,
            MomentOrder::First => mu,
            MomentOrder::Second => mu * mu,
        };
        acc += w * f * p;
    }
    Ok(0.5 * acc)
}

/// The full (r, mu, omega) discretization.
///
/// Radial cells are finite volumes with arithmetic-midpoint centers; energy
/// groups are geometric with configurable ratio. The first radial edge may
/// sit at r = 0, where the zero-area face encodes the symmetry condition.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    r_edges: Vec<f64>,
    r_centers: Vec<f64>,
    rule: AngularRule,
    omega: Vec<f64>,
    omega_widths: Vec<f64>,
    /// Signal speed in cm/s; test problems often set this to 1.
    c: f64,
}

impl PhaseGrid {
    /// Uniform radial cells on [0, r_max] with geometric energy groups
    /// omega_min * ratio^g.
    pub fn uniform(
        n_r: usize,
        r_max: f64,
        n_mu: usize,
        n_omega: usize,
        omega_min: f64,
        omega_ratio: f64,
        c: f64,
    ) -> Result<Self> {
        if n_r == 0 || !r_max.is_finite() || r_max <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "radial grid needs n_r >= 1 and r_max > 0, got n_r = {n_r}, r_max = {r_max}"
            )));
        }
        let dr = r_max / n_r as f64;
        let edges: Vec<f64> = (0..=n_r).map(|i| i as f64 * dr).collect();
        Self::from_edges(edges, n_mu, n_omega, omega_min, omega_ratio, c)
    }

    /// Build from explicit radial edges (strictly increasing, non-negative).
    pub fn from_edges(
        r_edges: Vec<f64>,
        n_mu: usize,
        n_omega: usize,
        omega_min: f64,
        omega_ratio: f64,
        c: f64,
    ) -> Result<Self> {
        if r_edges.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two radial edges".into(),
            ));
        }
        if r_edges[0] < 0.0 {
            return Err(Error::InvalidArgument(
                "radial edges must be non-negative".into(),
            ));
        }
        for pair in r_edges.windows(2) {
            if !(pair[1] > pair[0]) || !pair[1].is_finite() {
                return Err(Error::InvalidArgument(
                    "radial edges must be finite and strictly increasing".into(),
                ));
            }
        }
        if n_omega == 0 || !(omega_min > 0.0) || !(omega_ratio > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "energy groups need n_omega >= 1, omega_min > 0, ratio > 1; got \
                 n_omega = {n_omega}, omega_min = {omega_min}, ratio = {omega_ratio}"
            )));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("signal speed must be positive, got {c}")));
        }
        let rule = gauss_legendre_rule(n_mu)?;
        let r_centers = r_edges
            .windows(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect();
        let omega: Vec<f64> = (0..n_omega)
            .map(|g| omega_min * omega_ratio.powi(g as i32))
            .collect();
        // Group widths from geometric half-edges; used only as integration
        // weights in energy-integrated norms.
        let s = omega_ratio.sqrt();
        let omega_widths = omega.iter().map(|&og| og * (s - 1.0 / s)).collect();
        Ok(Self {
            r_edges,
            r_centers,
            rule,
            omega,
            omega_widths,
            c,
        })
    }

    /// The same angular rule and energy groups on new radial edges. Used by
    /// resolution studies that must hold everything but the mesh fixed.
    pub fn with_radial_edges(&self, r_edges: Vec<f64>) -> Result<Self> {
        if r_edges.len() < 2 {
            return Err(Error::InvalidArgument(
                "need at least two radial edges".into(),
            ));
        }
        if r_edges[0] < 0.0 {
            return Err(Error::InvalidArgument(
                "radial edges must be non-negative".into(),
            ));
        }
        for pair in r_edges.windows(2) {
            if !(pair[1] > pair[0]) || !pair[1].is_finite() {
                return Err(Error::InvalidArgument(
                    "radial edges must be finite and strictly increasing".into(),
                ));
            }
        }
        let r_centers = r_edges
            .windows(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect();
        Ok(Self {
            r_edges,
            r_centers,
            ..self.clone()
        })
    }

    pub fn n_r(&self) -> usize {
        self.r_centers.len()
    }

    pub fn n_mu(&self) -> usize {
        self.rule.len()
    }

    pub fn n_omega(&self) -> usize {
        self.omega.len()
    }

    pub fn r_edges(&self) -> &[f64] {
        &self.r_edges
    }

    pub fn r_centers(&self) -> &[f64] {
        &self.r_centers
    }

    /// Width of radial cell i.
    pub fn dr(&self, i: usize) -> f64 {
        self.r_edges[i + 1] - self.r_edges[i]
    }

    pub fn min_dr(&self) -> f64 {
        self.r_edges
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn r_max(&self) -> f64 {
        *self.r_edges.last().unwrap()
    }

    pub fn rule(&self) -> &AngularRule {
        &self.rule
    }

    /// Energy group centers, strictly increasing.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Energy group widths (integration weights for energy sums).
    pub fn omega_widths(&self) -> &[f64] {
        &self.omega_widths
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    fn idx(&self, ir: usize, ig: usize, ik: usize) -> usize {
        (ir * self.n_omega() + ig) * self.n_mu() + ik
    }

    fn moment_idx(&self, ir: usize, ig: usize) -> usize {
        ir * self.n_omega() + ig
    }
}

/// A distribution function sampled at every (r, omega, mu) point.
/// The ordinate index is contiguous so that angular moments and the
/// per-point collision solve work on slices.
#[derive(Debug, Clone)]
pub struct DistributionField {
    values: Vec<f64>,
    n_r: usize,
    n_omega: usize,
    n_mu: usize,
}

impl DistributionField {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self {
            values: vec![0.0; grid.n_r() * grid.n_omega() * grid.n_mu()],
            n_r: grid.n_r(),
            n_omega: grid.n_omega(),
            n_mu: grid.n_mu(),
        }
    }

    /// Sample a closure f(r, mu, omega) on the grid.
    pub fn from_fn(grid: &PhaseGrid, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for ir in 0..grid.n_r() {
            let r = grid.r_centers()[ir];
            for ig in 0..grid.n_omega() {
                let og = grid.omega()[ig];
                for (ik, &mu) in grid.rule().mu().iter().enumerate() {
                    out.values[grid.idx(ir, ig, ik)] = f(r, mu, og);
                }
            }
        }
        out
    }

    pub fn get(&self, grid: &PhaseGrid, ir: usize, ig: usize, ik: usize) -> f64 {
        self.values[grid.idx(ir, ig, ik)]
    }

    pub fn set(&mut self, grid: &PhaseGrid, ir: usize, ig: usize, ik: usize, v: f64) {
        let i = grid.idx(ir, ig, ik);
        self.values[i] = v;
    }

    /// All ordinate values at fixed (r, omega).
    pub fn mu_slice(&self, grid: &PhaseGrid, ir: usize, ig: usize) -> &[f64] {
        let start = grid.idx(ir, ig, 0);
        &self.values[start..start + self.n_mu]
    }

    pub fn mu_slice_mut(&mut self, grid: &PhaseGrid, ir: usize, ig: usize) -> &mut [f64] {
        let start = grid.idx(ir, ig, 0);
        &mut self.values[start..start + self.n_mu]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_r, self.n_omega, self.n_mu)
    }

    /// Reject non-finite entries; solvers call this on ingested data.
    pub fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "distribution field contains a non-finite value at flat index {pos}"
            )));
        }
        Ok(())
    }

    /// Angular moment of the whole field, one value per (r, omega).
    pub fn moment(&self, grid: &PhaseGrid, order: MomentOrder, role: MomentRole) -> MomentField {
        let mut out = MomentField::zeros(grid, role);
        for ir in 0..grid.n_r() {
            for ig in 0..grid.n_omega() {
                let m = angular_moment(self.mu_slice(grid, ir, ig), order, grid.rule())
                    .expect("slice length matches rule by construction");
                out.set(grid, ir, ig, m);
            }
        }
        out
    }

    /// Weighted L2 norm with measure r^2 dr (w/2) dmu domega.
    pub fn weighted_l2(&self, grid: &PhaseGrid) -> f64 {
        let mut num = 0.0;
        let mut vol = 0.0;
        for ir in 0..grid.n_r() {
            let r = grid.r_centers()[ir];
            let dr = grid.dr(ir);
            for ig in 0..grid.n_omega() {
                let dw = grid.omega_widths()[ig];
                for (ik, &w) in grid.rule().w().iter().enumerate() {
                    let v = self.values[grid.idx(ir, ig, ik)];
                    let weight = r * r * dr * 0.5 * w * dw;
                    num += weight * v * v;
                    vol += weight;
                }
            }
        }
        (num / vol).sqrt()
    }
}

/// What a moment field holds; the tag is fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentRole {
    /// Angular mean of the full distribution.
    Beta,
    /// Angular mean of the trapped component.
    BetaTrapped,
    /// Angular mean of the streaming component.
    BetaStreaming,
    /// First angular moment (radial flux density).
    FirstMoment,
    /// Net interaction rate or any other source-like quantity.
    Source,
    /// Residual of an identity or limit equation.
    Residual,
}

/// A scalar field on (r, omega), e.g. an angular moment of the distribution.
#[derive(Debug, Clone)]
pub struct MomentField {
    values: Vec<f64>,
    n_r: usize,
    n_omega: usize,
    role: MomentRole,
}

impl MomentField {
    pub fn zeros(grid: &PhaseGrid, role: MomentRole) -> Self {
        Self {
            values: vec![0.0; grid.n_r() * grid.n_omega()],
            n_r: grid.n_r(),
            n_omega: grid.n_omega(),
            role,
        }
    }

    pub fn from_fn(grid: &PhaseGrid, role: MomentRole, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, role);
        for ir in 0..grid.n_r() {
            for ig in 0..grid.n_omega() {
                out.values[grid.moment_idx(ir, ig)] = f(grid.r_centers()[ir], grid.omega()[ig]);
            }
        }
        out
    }

    pub fn role(&self) -> MomentRole {
        self.role
    }

    pub fn get(&self, grid: &PhaseGrid, ir: usize, ig: usize) -> f64 {
        self.values[grid.moment_idx(ir, ig)]
    }

    pub fn set(&mut self, grid: &PhaseGrid, ir: usize, ig: usize, v: f64) {
        let i = grid.moment_idx(ir, ig);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_r, self.n_omega)
    }

    /// Weighted L2 norm with measure r^2 dr domega.
    pub fn weighted_l2(&self, grid: &PhaseGrid) -> f64 {
        let mut num = 0.0;
        let mut vol = 0.0;
        for ir in 0..grid.n_r() {
            let r = grid.r_centers()[ir];
            let dr = grid.dr(ir);
            for ig in 0..grid.n_omega() {
                let dw = grid.omega_widths()[ig];
                let v = self.values[grid.moment_idx(ir, ig)];
                let weight = r * r * dr * dw;
                num += weight * v * v;
                vol += weight;
            }
        }
        (num / vol).sqrt()
    }
}
