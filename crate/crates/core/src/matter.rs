//! Background matter and interaction rates: piecewise-linear radial profiles
//! for density, velocity, emissivity, absorption, and the two scattering
//! coefficients, plus the stiffness scalings used by the asymptotic studies.
//!
//! Stored rate profiles are always the unscaled ("barred") values; scaling is
//! applied on evaluation, so a model carries its own epsilon and mode and two
//! models sharing profiles can represent different stiffness regimes.

use crate::error::{Error, Result};

/// Default optical-depth threshold defining the scattering sphere.
pub const DEFAULT_TAU_THRESHOLD: f64 = 2.0 / 3.0;

/// A piecewise-linear table y(x) on ascending knots.
///
/// Below the first knot the value is held constant (profiles usually start
/// at x = 0 anyway); beyond the last knot evaluation is an error — the
/// domain boundary is where the vacuum condition lives, not the table's.
#[derive(Debug, Clone)]
pub struct Profile {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Profile {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("profile needs at least one knot".into()));
        }
        for pair in points.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::InvalidArgument(
                    "profile knots must be strictly increasing".into(),
                ));
            }
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidArgument("profile knots must be finite".into()));
        }
        Ok(Self {
            x: points.iter().map(|p| p.0).collect(),
            y: points.iter().map(|p| p.1).collect(),
        })
    }

    /// Constant profile.
    pub fn constant(y: f64) -> Self {
        Self::new(&[(0.0, y)]).expect("single finite knot")
    }

    /// The same profile with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.iter().map(|&y| factor * y).collect(),
        }
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn segment(&self, x: f64) -> Result<usize> {
        let last = self.x_max();
        // Tolerate round-off at the outer edge but nothing beyond it.
        if x > last * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::OutOfDomain {
                what: "profile coordinate",
                value: x,
                min: self.x[0],
                max: last,
            });
        }
        // index of the segment [x_i, x_{i+1}] containing x
        let i = self.x.partition_point(|&k| k <= x);
        Ok(i.saturating_sub(1).min(self.x.len().saturating_sub(2)))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        // A single knot means "this value everywhere".
        if self.x.len() == 1 {
            return Ok(self.y[0]);
        }
        if x <= self.x[0] {
            return Ok(self.y[0]);
        }
        let i = self.segment(x)?;
        let t = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        Ok(self.y[i] + t.clamp(0.0, 1.0) * (self.y[i + 1] - self.y[i]))
    }

    /// Slope of the segment containing x (zero for single-knot profiles and
    /// below the first knot).
    pub fn slope(&self, x: f64) -> Result<f64> {
        if self.x.len() == 1 || x <= self.x[0] {
            return Ok(0.0);
        }
        let i = self.segment(x)?;
        Ok((self.y[i + 1] - self.y[i]) / (self.x[i + 1] - self.x[i]))
    }

    /// Knot coordinates (used to build exact integration meshes).
    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// True when the profile is identically zero.
    pub fn is_zero(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0)
    }
}

/// One radial profile per energy group.
#[derive(Debug, Clone)]
pub struct GroupProfiles {
    per_group: Vec<Profile>,
}

impl GroupProfiles {
    pub fn new(per_group: Vec<Profile>) -> Result<Self> {
        if per_group.is_empty() {
            return Err(Error::InvalidArgument("need at least one group profile".into()));
        }
        Ok(Self { per_group })
    }

    /// The same profile for every group.
    pub fn shared(profile: Profile, n_omega: usize) -> Result<Self> {
        Self::new(vec![profile; n_omega.max(1)])
    }

    pub fn group(&self, g: usize) -> &Profile {
        &self.per_group[g]
    }

    pub fn set_group(&mut self, g: usize, profile: Profile) {
        self.per_group[g] = profile;
    }

    pub fn n_groups(&self) -> usize {
        self.per_group.len()
    }
}

/// Which variables are stiffened by 1/epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    /// Unscaled problem.
    None,
    /// Rates j, chi, phi0, phi1 divided by epsilon (stiff reactions).
    ReactionCollision,
    /// Slow time: the Lagrangian part of the transport operator carries a
    /// factor epsilon when assembled.
    Time,
    /// Both of the above (diffusion regime).
    Both,
}

/// Matter and rates interpolated to one phase-space point, scaling applied.
#[derive(Debug, Clone, Copy)]
pub struct MaterialState {
    pub rho: f64,
    /// Fluid velocity in the evolution-time units (cm/s).
    pub v: f64,
    /// Lagrangian compression rate d(ln rho)/(c dt) in 1/cm, assembled from
    /// the uniform d(ln rho)/dt table plus v * d(ln rho)/dr.
    pub dlnrho_cdt: f64,
    /// Emissivity (1/cm).
    pub j: f64,
    /// Absorption opacity (1/cm).
    pub chi: f64,
    /// j + chi: the stimulated-corrected total reaction opacity.
    pub chi_tilde: f64,
    /// Zeroth Legendre coefficient of the scattering kernel (1/cm).
    pub phi0: f64,
    /// First Legendre coefficient of the scattering kernel (1/cm).
    pub phi1: f64,
}

/// Radial matter model with per-group interaction rates.
#[derive(Debug, Clone)]
pub struct MatterModel {
    rho: Profile,
    v: Profile,
    /// Uniform compression rate d(ln rho)/dt as a function of time (1/s).
    dlnrho_dt: Profile,
    j: GroupProfiles,
    chi: GroupProfiles,
    phi0: GroupProfiles,
    phi1: GroupProfiles,
    omega: Vec<f64>,
    c: f64,
    scaling: ScalingMode,
    epsilon: f64,
}

impl MatterModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho: Profile,
        v: Profile,
        dlnrho_dt: Profile,
        j: GroupProfiles,
        chi: GroupProfiles,
        phi0: GroupProfiles,
        phi1: GroupProfiles,
        omega: Vec<f64>,
        c: f64,
    ) -> Result<Self> {
        let n = omega.len();
        if n == 0 {
            return Err(Error::InvalidArgument("model needs at least one energy group".into()));
        }
        for (name, gp) in [("j", &j), ("chi", &chi), ("phi0", &phi0), ("phi1", &phi1)] {
            if gp.n_groups() != n {
                return Err(Error::InvalidArgument(format!(
                    "rate {name} has {} group profiles but the model has {n} groups",
                    gp.n_groups()
                )));
            }
        }
        if !(c > 0.0) {
            return Err(Error::InvalidArgument("signal speed must be positive".into()));
        }
        Ok(Self {
            rho,
            v,
            dlnrho_dt,
            j,
            chi,
            phi0,
            phi1,
            omega,
            c,
            scaling: ScalingMode::None,
            epsilon: 1.0,
        })
    }

    /// A frozen-matter model: static uniform density, zero velocity.
    pub fn static_rates(
        j: GroupProfiles,
        chi: GroupProfiles,
        phi0: GroupProfiles,
        phi1: GroupProfiles,
        omega: Vec<f64>,
        c: f64,
    ) -> Result<Self> {
        Self::new(
            Profile::constant(1.0),
            Profile::constant(0.0),
            Profile::constant(0.0),
            j,
            chi,
            phi0,
            phi1,
            omega,
            c,
        )
    }

    /// The same model with all four rate families multiplied by `factor`.
    /// The scaling state is carried over unchanged.
    pub fn with_rates_scaled(&self, factor: f64) -> Result<MatterModel> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rate factor must be positive and finite, got {factor}"
            )));
        }
        let scale = |gp: &GroupProfiles| {
            GroupProfiles::new((0..gp.n_groups()).map(|g| gp.group(g).scaled(factor)).collect())
        };
        Ok(Self {
            j: scale(&self.j)?,
            chi: scale(&self.chi)?,
            phi0: scale(&self.phi0)?,
            phi1: scale(&self.phi1)?,
            ..self.clone()
        })
    }

    /// The same model with the matter brought to rest: zero velocity and
    /// zero compression. Rates and scaling state are untouched.
    pub fn without_motion(&self) -> MatterModel {
        Self {
            v: Profile::constant(0.0),
            dlnrho_dt: Profile::constant(0.0),
            ..self.clone()
        }
    }

    pub fn scaling(&self) -> ScalingMode {
        self.scaling
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// True when any moving-matter coupling is active (nonzero velocity or
    /// density drift); false means the slow-time transport terms all vanish
    /// for stationary fields.
    pub fn has_moving_matter(&self) -> bool {
        !(self.v.is_zero() && self.dlnrho_dt.is_zero())
    }

    /// 1/epsilon when reactions are stiffened, else 1.
    pub fn rate_scale(&self) -> f64 {
        match self.scaling {
            ScalingMode::ReactionCollision | ScalingMode::Both => 1.0 / self.epsilon,
            _ => 1.0,
        }
    }

    /// Factor multiplying the Lagrangian (slow-time) part of the transport
    /// operator: epsilon under time scaling, 1 otherwise.
    pub fn epsilon_plus(&self) -> f64 {
        match self.scaling {
            ScalingMode::Time | ScalingMode::Both => self.epsilon,
            _ => 1.0,
        }
    }

    fn group_index(&self, omega: f64) -> Result<usize> {
        let lo = self.omega[0];
        let hi = *self.omega.last().unwrap();
        if omega < lo * (1.0 - 1e-9) || omega > hi * (1.0 + 1e-9) {
            return Err(Error::OutOfDomain {
                what: "energy",
                value: omega,
                min: lo,
                max: hi,
            });
        }
        // nearest group center; callers pass exact centers
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (g, &og) in self.omega.iter().enumerate() {
            let d = (omega - og).abs();
            if d < dist {
                dist = d;
                best = g;
            }
        }
        Ok(best)
    }

    /// Interpolate the material state at (r, omega, t) with the model's
    /// scaling applied to the rates.
    pub fn evaluate(&self, r: f64, omega: f64, t: f64) -> Result<MaterialState> {
        let g = self.group_index(omega)?;
        self.evaluate_group(r, g, t)
    }

    /// Same as `evaluate` but addressing the energy group by index.
    pub fn evaluate_group(&self, r: f64, g: usize, t: f64) -> Result<MaterialState> {
        if g >= self.omega.len() {
            return Err(Error::InvalidArgument(format!(
                "group index {g} out of range (model has {})",
                self.omega.len()
            )));
        }
        let rho = self.rho.eval(r)?;
        let v = self.v.eval(r)?;
        let compress_t = self.dlnrho_dt.eval(t)?;
        let drho_dr = self.rho.slope(r)?;
        if rho <= 0.0 {
            return Err(Error::InvalidArgument(format!("density must stay positive, got {rho} at r = {r}")));
        }
        let dlnrho_cdt = (compress_t + v * drho_dr / rho) / self.c;
        let s = self.rate_scale();
        let j = s * self.j.group(g).eval(r)?;
        let chi = s * self.chi.group(g).eval(r)?;
        let phi0 = s * self.phi0.group(g).eval(r)?;
        let phi1 = s * self.phi1.group(g).eval(r)?;
        Ok(MaterialState {
            rho,
            v,
            dlnrho_cdt,
            j,
            chi,
            chi_tilde: j + chi,
            phi0,
            phi1,
        })
    }

    /// Return a copy of the model with the stiffness scaling installed.
    /// With epsilon = 1 every evaluated state is unchanged.
    pub fn apply_scaling(&self, epsilon: f64, mode: ScalingMode) -> Result<MatterModel> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scaling parameter must be positive and finite, got {epsilon}"
            )));
        }
        let mut out = self.clone();
        out.epsilon = epsilon;
        out.scaling = mode;
        Ok(out)
    }

    /// Transport opacity 1/lambda = chi_tilde + phi0 - phi1 at (r, g, t).
    pub fn opacity_group(&self, r: f64, g: usize, t: f64) -> Result<f64> {
        let s = self.evaluate_group(r, g, t)?;
        Ok(s.chi_tilde + s.phi0 - s.phi1)
    }

    /// Radius of the scattering sphere for the given energy: the largest r
    /// whose outward optical depth integral reaches `tau_threshold`, or 0
    /// when the whole domain is transparent. `r_outer` is the domain edge.
    pub fn scattering_sphere_radius(
        &self,
        omega: f64,
        r_outer: f64,
        tau_threshold: f64,
    ) -> Result<f64> {
        if !(tau_threshold > 0.0) {
            return Err(Error::InvalidArgument(
                "optical depth threshold must be positive".into(),
            ));
        }
        let g = self.group_index(omega)?;
        // Mesh: union of rate knots plus uniform refinement. The opacity is
        // piecewise linear on this mesh, so trapezoids integrate it exactly.
        let mut xs: Vec<f64> = vec![0.0, r_outer];
        for p in [&self.j, &self.chi, &self.phi0, &self.phi1] {
            xs.extend(p.group(g).knots().iter().copied().filter(|&x| x > 0.0 && x < r_outer));
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let mut mesh = Vec::with_capacity(4096);
        let per_seg = (4096 / xs.len().max(1)).max(8);
        for seg in xs.windows(2) {
            for k in 0..per_seg {
                mesh.push(seg[0] + (seg[1] - seg[0]) * k as f64 / per_seg as f64);
            }
        }
        mesh.push(r_outer);
        let kappa: Vec<f64> = mesh
            .iter()
            .map(|&r| self.opacity_group(r, g, 0.0))
            .collect::<Result<_>>()?;
        if kappa.iter().any(|&k| k < 0.0) {
            return Err(Error::SingularOpacity(
                "negative transport opacity in scattering sphere integral".into(),
            ));
        }
        // Accumulate tau from the outer edge inward.
        let mut tau_hi = 0.0; // tau at mesh[i+1]
        for i in (0..mesh.len() - 1).rev() {
            let (x0, x1) = (mesh[i], mesh[i + 1]);
            let (k0, k1) = (kappa[i], kappa[i + 1]);
            let seg = (x1 - x0) * 0.5 * (k0 + k1);
            let tau_lo = tau_hi + seg;
            if tau_lo >= tau_threshold {
                // Solve for the crossing inside [x0, x1] where kappa is
                // linear: tau(x) = tau_hi + (x1-x)(kappa(x)+k1)/2.
                let h = x1 - x0;
                let slope = (k1 - k0) / h;
                let need = tau_threshold - tau_hi;
                let d = if slope.abs() < 1e-300 {
                    need / k1.max(1e-300)
                } else {
                    // (slope/2) d^2 - k1 d + need = 0, smallest positive root
                    let disc = (k1 * k1 - 2.0 * slope * need).max(0.0).sqrt();
                    if slope > 0.0 {
                        (k1 - disc) / slope
                    } else {
                        2.0 * need / (k1 + disc)
                    }
                };
                return Ok((x1 - d.clamp(0.0, h)).max(0.0));
            }
            tau_hi = tau_lo;
        }
        Ok(0.0)
    }
}

/// Transport mean free path 1/(chi_tilde + phi0 - phi1) of a state.
pub fn mean_free_path(state: &MaterialState) -> Result<f64> {
    let denom = state.chi_tilde + state.phi0 - state.phi1;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::SingularOpacity(format!(
            "chi_tilde + phi0 - phi1 = {denom:e} must be positive"
        )));
    }
    Ok(1.0 / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_model(j: f64, chi: f64, phi0: f64, phi1: f64) -> MatterModel {
        let omega = vec![1.0, 1.3];
        MatterModel::static_rates(
            GroupProfiles::shared(Profile::constant(j), 2).unwrap(),
            GroupProfiles::shared(Profile::constant(chi), 2).unwrap(),
            GroupProfiles::shared(Profile::constant(phi0), 2).unwrap(),
            GroupProfiles::shared(Profile::constant(phi1), 2).unwrap(),
            omega,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn profile_interpolates_and_guards_domain() {
        let p = Profile::new(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert!((p.eval(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((p.eval(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((p.eval(2.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(p.eval(2.5).is_err());
        assert!((p.slope(0.5).unwrap() - 1.0).abs() < 1e-15);
        // constant extension below the first knot
        let q = Profile::new(&[(1.0, 5.0), (2.0, 6.0)]).unwrap();
        assert!((q.eval(0.2).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(q.slope(0.2).unwrap(), 0.0);
    }

    #[test]
    fn profile_rejects_bad_knots() {
        assert!(Profile::new(&[]).is_err());
        assert!(Profile::new(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(Profile::new(&[(0.0, f64::NAN)]).is_err());
    }

    #[test]
    fn state_carries_chi_tilde_and_compression() {
        let mut m = uniform_model(0.4, 0.6, 0.5, 0.1);
        m.rho = Profile::new(&[(0.0, 2.0), (1.0, 1.0)]).unwrap();
        m.v = Profile::constant(0.1);
        m.dlnrho_dt = Profile::constant(-0.2);
        let s = m.evaluate(0.5, 1.0, 0.0).unwrap();
        assert!((s.chi_tilde - 1.0).abs() < 1e-15);
        // dlnrho/(c dt) = (-0.2 + 0.1 * (-1.0)/1.5) / 1.0
        assert!((s.dlnrho_cdt - (-0.2 - 0.1 / 1.5)).abs() < 1e-15);
    }

    #[test]
    fn energy_outside_groups_is_rejected() {
        let m = uniform_model(0.1, 0.1, 0.0, 0.0);
        assert!(m.evaluate(0.0, 0.5, 0.0).is_err());
        assert!(m.evaluate(0.0, 2.0, 0.0).is_err());
        assert!(m.evaluate(0.0, 1.3, 0.0).is_ok());
    }

    #[test]
    fn reaction_scaling_divides_rates_and_identity_at_one() {
        let m = uniform_model(0.4, 0.6, 0.5, 0.1);
        let scaled = m.apply_scaling(0.1, ScalingMode::ReactionCollision).unwrap();
        let s = scaled.evaluate(0.0, 1.0, 0.0).unwrap();
        assert!((s.j - 4.0).abs() < 1e-12);
        assert!((s.chi_tilde - 10.0).abs() < 1e-12);
        assert_eq!(scaled.epsilon_plus(), 1.0);

        let unit = m.apply_scaling(1.0, ScalingMode::Both).unwrap();
        let a = m.evaluate(0.3, 1.0, 0.0).unwrap();
        let b = unit.evaluate(0.3, 1.0, 0.0).unwrap();
        assert_eq!(a.j, b.j);
        assert_eq!(a.phi1, b.phi1);

        let time = m.apply_scaling(0.25, ScalingMode::Time).unwrap();
        assert_eq!(time.rate_scale(), 1.0);
        assert_eq!(time.epsilon_plus(), 0.25);
    }

    #[test]
    fn mean_free_path_inverts_transport_opacity() {
        let m = uniform_model(0.4, 0.6, 0.5, 0.1);
        let s = m.evaluate(0.0, 1.0, 0.0).unwrap();
        let lambda = mean_free_path(&s).unwrap();
        assert!((lambda * (s.chi_tilde + s.phi0 - s.phi1) - 1.0).abs() < 1e-14);

        let vac = uniform_model(0.0, 0.0, 0.0, 0.0);
        let sv = vac.evaluate(0.0, 1.0, 0.0).unwrap();
        assert!(mean_free_path(&sv).is_err());
    }

    #[test]
    fn scattering_sphere_with_unit_opacity() {
        // opacity 1 everywhere: tau(r) = R - r, so tau = 2/3 at r = R - 2/3.
        let m = uniform_model(0.5, 0.5, 0.0, 0.0);
        let r = m.scattering_sphere_radius(1.0, 10.0, 2.0 / 3.0).unwrap();
        assert!((r - (10.0 - 2.0 / 3.0)).abs() < 1e-9, "r = {r}");
    }

    #[test]
    fn transparent_domain_returns_zero() {
        let m = uniform_model(5e-7, 5e-7, 0.0, 0.0);
        let r = m.scattering_sphere_radius(1.0, 10.0, 2.0 / 3.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn scattering_sphere_monotone_in_threshold() {
        let mut m = uniform_model(0.0, 0.0, 0.0, 0.0);
        // ramp opacity via chi: 0 at center, 2 at edge
        m.chi = GroupProfiles::shared(Profile::new(&[(0.0, 0.0), (10.0, 2.0)]).unwrap(), 2).unwrap();
        let mut prev = f64::INFINITY;
        for tau in [0.1, 0.5, 1.0, 3.0, 8.0] {
            let r = m.scattering_sphere_radius(1.0, 10.0, tau).unwrap();
            assert!(r <= prev + 1e-12, "tau = {tau}: r = {r} > prev = {prev}");
            prev = r;
        }
    }
}
