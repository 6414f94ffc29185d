//! Plain-text scenario files.
//!
//! A scenario is a flat list of `key = value` assignments, one per line,
//! with `#` starting a comment anywhere on a line. Keys are dotted,
//! lower-case, and unknown keys are rejected so typos cannot silently fall
//! back to defaults. Values are numbers, bare tokens, or profiles; a
//! profile is either a single number (constant everywhere) or a
//! whitespace-separated list of `x:value` pairs interpolated linearly and
//! never extrapolated outward.
//!
//! ```text
//! # geometry
//! grid.n_r        = 100
//! grid.r_max      = 1.0
//! grid.n_mu       = 8
//! grid.n_omega    = 4
//! grid.omega_min  = 3.0
//! grid.omega_ratio = 1.3
//!
//! # rates (shared across groups unless overridden per group)
//! rates.j    = 0.0:2.4 0.5:0.3 1.0:0.0
//! rates.chi  = 0.6
//! rates.phi0 = 1.0
//! rates.phi1 = 0.2
//! rates.j[1] = 0.0:1.2 1.0:0.0       # group 1 only
//!
//! # a full scattering table for group 0; its rank-two truncation replaces
//! # phi0/phi1 for that group
//! kernel[0] = 0.5 0.5 ... (n_mu^2 row-major entries)
//!
//! solve.t_end = 1.0
//! ```
//!
//! Every parse error names the 1-based line it came from.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::asymptotics::{HierarchyVariant, LimitKind};
use crate::boltzmann::SolveOptions;
use crate::error::{Error, Result};
use crate::grid::{DistributionField, PhaseGrid};
use crate::idsa::{IdsaOptions, LimiterVariant};
use crate::kinetics::{legendre_truncate, CollisionKernel, DiffScheme, OuterBoundary};
use crate::matter::{GroupProfiles, MatterModel, Profile, ScalingMode};

/// Epsilon sweep request carried by a scenario.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: LimitKind,
    pub epsilons: Vec<f64>,
    pub t_end: f64,
}

/// Hierarchy verification request carried by a scenario.
#[derive(Debug, Clone)]
pub struct HierarchySpec {
    pub variant: HierarchyVariant,
    pub epsilon: f64,
}

/// A parsed, validated scenario. Construction happens entirely in
/// `parse`, so a `Scenario` value is always internally consistent: the
/// grid exists, the model's profiles cover it, and every option token was
/// recognized.
#[derive(Debug, Clone)]
pub struct Scenario {
    entries: Vec<(String, String)>,
    grid: PhaseGrid,
    model: MatterModel,
    initial: Profile,
    /// End time for the evolution subcommands; sweeps and hierarchy checks
    /// bring their own horizons.
    pub t_end: Option<f64>,
    solve_opts: SolveOptions,
    idsa_opts: IdsaOptions,
    pub sweep: Option<SweepSpec>,
    pub hierarchy: Option<HierarchySpec>,
}

/// Raw `key = value` assignments with their line numbers, consumed key by
/// key so whatever remains at the end is by definition unknown.
struct RawMap {
    map: BTreeMap<String, (usize, String)>,
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

impl RawMap {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(bad(line, format!("expected `key = value`, got `{content}`")));
            };
            let key = content[..eq].trim();
            let value = content[eq + 1..].trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(bad(line, format!("malformed key `{key}`")));
            }
            if value.is_empty() {
                return Err(bad(line, format!("key `{key}` has no value")));
            }
            if let Some((first, _)) = map.insert(key.to_string(), (line, value.to_string())) {
                return Err(bad(
                    line,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<(usize, f64)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let x: f64 = v
                    .parse()
                    .map_err(|_| bad(line, format!("`{key}` wants a number, got `{v}`")))?;
                if !x.is_finite() {
                    return Err(bad(line, format!("`{key}` must be finite, got `{v}`")));
                }
                Ok(Some((line, x)))
            }
        }
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<(usize, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let x: usize = v.parse().map_err(|_| {
                    bad(line, format!("`{key}` wants a non-negative integer, got `{v}`"))
                })?;
                Ok(Some((line, x)))
            }
        }
    }

    /// A whitespace-separated list of numbers.
    fn take_floats(&mut self, key: &str) -> Result<Option<(usize, Vec<f64>)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let mut out = Vec::new();
                for tok in v.split_whitespace() {
                    let x: f64 = tok.parse().map_err(|_| {
                        bad(line, format!("`{key}`: `{tok}` is not a number"))
                    })?;
                    out.push(x);
                }
                Ok(Some((line, out)))
            }
        }
    }

    /// A profile: one bare number, or `x:value` pairs.
    fn take_profile(&mut self, key: &str) -> Result<Option<(usize, Profile)>> {
        let Some((line, v)) = self.take(key) else {
            return Ok(None);
        };
        let toks: Vec<&str> = v.split_whitespace().collect();
        if toks.len() == 1 && !toks[0].contains(':') {
            let y: f64 = toks[0]
                .parse()
                .map_err(|_| bad(line, format!("`{key}`: `{v}` is not a number")))?;
            if !y.is_finite() {
                return Err(bad(line, format!("`{key}` must be finite")));
            }
            return Ok(Some((line, Profile::constant(y))));
        }
        let mut pts = Vec::with_capacity(toks.len());
        for tok in &toks {
            let Some((xs, ys)) = tok.split_once(':') else {
                return Err(bad(
                    line,
                    format!("`{key}`: expected `x:value` pairs, got `{tok}`"),
                ));
            };
            let x: f64 = xs
                .parse()
                .map_err(|_| bad(line, format!("`{key}`: `{xs}` is not a number")))?;
            let y: f64 = ys
                .parse()
                .map_err(|_| bad(line, format!("`{key}`: `{ys}` is not a number")))?;
            pts.push((x, y));
        }
        let profile =
            Profile::new(&pts).map_err(|e| bad(line, format!("`{key}`: {e}")))?;
        Ok(Some((line, profile)))
    }

    fn take_token<T: Copy>(
        &mut self,
        key: &str,
        table: &[(&str, T)],
    ) -> Result<Option<(usize, T)>> {
        let Some((line, v)) = self.take(key) else {
            return Ok(None);
        };
        for &(name, val) in table {
            if v == name {
                return Ok(Some((line, val)));
            }
        }
        let names: Vec<&str> = table.iter().map(|&(n, _)| n).collect();
        Err(bad(
            line,
            format!("`{key}`: unknown value `{v}` (one of: {})", names.join(", ")),
        ))
    }

    /// Error out on whatever was never consumed.
    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.map.into_iter().next() {
            return Err(bad(line, format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

fn need<T>(opt: Option<(usize, T)>, key: &str) -> Result<(usize, T)> {
    opt.ok_or_else(|| bad(0, format!("missing required key `{key}`")))
}

/// A multi-knot profile must reach the outermost cell center; single-knot
/// (constant) profiles hold everywhere by definition.
fn check_covers_grid(key: &str, line: usize, p: &Profile, r_last: f64) -> Result<()> {
    if p.knots().len() > 1 && p.x_max() < r_last {
        return Err(bad(
            line,
            format!(
                "`{key}` ends at {} but the grid needs values out to {r_last}",
                p.x_max()
            ),
        ));
    }
    Ok(())
}

impl Scenario {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawMap::parse(text)?;
        let entries: Vec<(String, String)> = raw
            .map
            .iter()
            .map(|(k, (_, v))| (k.clone(), v.clone()))
            .collect();

        // --- grid ---------------------------------------------------------
        let (nr_line, n_r) = need(raw.take_usize("grid.n_r")?, "grid.n_r")?;
        let (_, r_max) = need(raw.take_f64("grid.r_max")?, "grid.r_max")?;
        let (_, n_mu) = need(raw.take_usize("grid.n_mu")?, "grid.n_mu")?;
        let (_, n_omega) = need(raw.take_usize("grid.n_omega")?, "grid.n_omega")?;
        let (_, omega_min) = need(raw.take_f64("grid.omega_min")?, "grid.omega_min")?;
        let (_, omega_ratio) = need(raw.take_f64("grid.omega_ratio")?, "grid.omega_ratio")?;
        let c = raw.take_f64("grid.c")?.map(|(_, v)| v).unwrap_or(1.0);
        let grid = PhaseGrid::uniform(n_r, r_max, n_mu, n_omega, omega_min, omega_ratio, c)
            .map_err(|e| bad(nr_line, format!("grid: {e}")))?;
        let r_last = *grid.r_centers().last().expect("grid has cells");

        // --- matter -------------------------------------------------------
        let profile_or = |raw: &mut RawMap, key: &str, default: f64| -> Result<Profile> {
            match raw.take_profile(key)? {
                Some((line, p)) => {
                    check_covers_grid(key, line, &p, r_last)?;
                    Ok(p)
                }
                None => Ok(Profile::constant(default)),
            }
        };
        let rho = profile_or(&mut raw, "matter.rho", 1.0)?;
        let v = profile_or(&mut raw, "matter.v", 0.0)?;
        // A profile in time, not radius; no coverage check against the grid.
        let dlnrho_dt = raw
            .take_profile("matter.dlnrho_dt")?
            .map(|(_, p)| p)
            .unwrap_or_else(|| Profile::constant(0.0));

        // --- rates: shared profile plus optional per-group overrides -------
        let group_rates = |raw: &mut RawMap, name: &str, required: bool| -> Result<GroupProfiles> {
            let base = match raw.take_profile(&format!("rates.{name}"))? {
                Some((line, p)) => {
                    check_covers_grid(&format!("rates.{name}"), line, &p, r_last)?;
                    p
                }
                None if required => {
                    return Err(bad(0, format!("missing required key `rates.{name}`")))
                }
                None => Profile::constant(0.0),
            };
            let mut gp = GroupProfiles::shared(base, n_omega)
                .map_err(|e| bad(0, format!("rates.{name}: {e}")))?;
            for g in 0..n_omega {
                let key = format!("rates.{name}[{g}]");
                if let Some((line, p)) = raw.take_profile(&key)? {
                    check_covers_grid(&key, line, &p, r_last)?;
                    gp.set_group(g, p);
                }
            }
            Ok(gp)
        };
        let j = group_rates(&mut raw, "j", true)?;
        let chi = group_rates(&mut raw, "chi", true)?;
        let mut phi0 = group_rates(&mut raw, "phi0", false)?;
        let mut phi1 = group_rates(&mut raw, "phi1", false)?;

        // Full scattering tables, truncated to their first two Legendre
        // coefficients; a kernel takes precedence over rates.phi* for its
        // group.
        for g in 0..n_omega {
            let key = format!("kernel[{g}]");
            if let Some((line, vals)) = raw.take_floats(&key)? {
                let kernel = CollisionKernel::new(n_mu, vals)
                    .map_err(|e| bad(line, format!("`{key}`: {e}")))?;
                let (p0, p1) = legendre_truncate(&kernel, grid.rule())
                    .map_err(|e| bad(line, format!("`{key}`: {e}")))?;
                phi0.set_group(g, Profile::constant(p0));
                phi1.set_group(g, Profile::constant(p1));
            }
        }

        let model = MatterModel::new(
            rho,
            v,
            dlnrho_dt,
            j,
            chi,
            phi0,
            phi1,
            grid.omega().to_vec(),
            c,
        )
        .map_err(|e| bad(0, format!("matter model: {e}")))?;

        // --- scaling --------------------------------------------------------
        let mode = raw
            .take_token(
                "scaling.mode",
                &[
                    ("none", ScalingMode::None),
                    ("reaction", ScalingMode::ReactionCollision),
                    ("time", ScalingMode::Time),
                    ("both", ScalingMode::Both),
                ],
            )?
            .map(|(_, m)| m)
            .unwrap_or(ScalingMode::None);
        let epsilon = raw.take_f64("scaling.epsilon")?;
        let model = match (mode, epsilon) {
            (ScalingMode::None, None) => model,
            (_, eps) => {
                let (line, eps) = eps.unwrap_or((0, 1.0));
                model
                    .apply_scaling(eps, mode)
                    .map_err(|e| bad(line, format!("scaling: {e}")))?
            }
        };

        // --- initial state and solver options -------------------------------
        let initial = match raw.take_profile("initial.f")? {
            Some((line, p)) => {
                check_covers_grid("initial.f", line, &p, r_last)?;
                p
            }
            None => Profile::constant(0.0),
        };
        let t_end = match raw.take_f64("solve.t_end")? {
            Some((line, v)) if !(v >= 0.0) => {
                return Err(bad(line, format!("`solve.t_end` must be >= 0, got {v}")))
            }
            other => other.map(|(_, v)| v),
        };
        let mut solve_opts = SolveOptions::default();
        if let Some((line, dt)) = raw.take_f64("solve.dt")? {
            if !(dt > 0.0) {
                return Err(bad(line, format!("`solve.dt` must be > 0, got {dt}")));
            }
            solve_opts.dt = Some(dt);
        }
        if let Some((line, s)) = raw.take_f64("solve.safety")? {
            if !(s > 0.0 && s <= 1.0) {
                return Err(bad(line, format!("`solve.safety` must be in (0, 1], got {s}")));
            }
            solve_opts.safety = s;
        }
        if let Some((_, scheme)) = raw.take_token(
            "solve.scheme",
            &[
                ("upwind", DiffScheme::Upwind),
                ("centered-conservative", DiffScheme::CenteredConservative),
                ("centered-pointwise", DiffScheme::CenteredPointwise),
            ],
        )? {
            solve_opts.scheme = scheme;
        }
        if let Some((_, boundary)) = raw.take_token(
            "solve.boundary",
            &[
                ("vacuum", OuterBoundary::Vacuum),
                ("bath", OuterBoundary::Bath),
            ],
        )? {
            solve_opts.boundary = boundary;
        }
        if let Some((_, n)) = raw.take_usize("solve.snapshots")? {
            solve_opts.snapshots = n;
        }

        let mut idsa_opts = IdsaOptions::default();
        if let Some((line, dt)) = raw.take_f64("idsa.dt")? {
            if !(dt > 0.0) {
                return Err(bad(line, format!("`idsa.dt` must be > 0, got {dt}")));
            }
            idsa_opts.dt = Some(dt);
        }
        if let Some((line, s)) = raw.take_f64("idsa.safety")? {
            if !(s > 0.0 && s <= 1.0) {
                return Err(bad(line, format!("`idsa.safety` must be in (0, 1], got {s}")));
            }
            idsa_opts.safety = s;
        }
        if let Some((_, v)) = raw.take_token(
            "idsa.limiter",
            &[
                ("idsa", LimiterVariant::Idsa),
                ("global", LimiterVariant::Global),
            ],
        )? {
            idsa_opts.variant = v;
        }
        if let Some((line, tau)) = raw.take_f64("idsa.tau_threshold")? {
            if !(tau > 0.0) {
                return Err(bad(
                    line,
                    format!("`idsa.tau_threshold` must be > 0, got {tau}"),
                ));
            }
            idsa_opts.tau_threshold = tau;
        }

        // --- sweep and hierarchy requests -----------------------------------
        let sweep_kind = raw.take_token(
            "sweep.kind",
            &[
                ("diffusion", LimitKind::Diffusion),
                ("reaction", LimitKind::Reaction),
                ("free_streaming", LimitKind::FreeStreaming),
                ("free_streaming_2nd", LimitKind::FreeStreamingSecondOrder),
            ],
        )?;
        let sweep_eps = raw.take_floats("sweep.epsilons")?;
        let sweep_t_end = raw.take_f64("sweep.t_end")?;
        let sweep = match (sweep_kind, sweep_eps, sweep_t_end) {
            (None, None, None) => None,
            (Some((_, kind)), Some((eline, epsilons)), Some((tline, t_end))) => {
                if epsilons.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                    return Err(bad(
                        eline,
                        "`sweep.epsilons` entries must be positive and finite".to_string(),
                    ));
                }
                if !(t_end > 0.0) {
                    return Err(bad(tline, format!("`sweep.t_end` must be > 0, got {t_end}")));
                }
                Some(SweepSpec {
                    kind,
                    epsilons,
                    t_end,
                })
            }
            _ => {
                return Err(bad(
                    0,
                    "a sweep needs all of sweep.kind, sweep.epsilons, sweep.t_end".to_string(),
                ))
            }
        };

        let h_variant = raw.take_token(
            "hierarchy.variant",
            &[
                ("reaction", HierarchyVariant::ReactionScaled),
                ("time_and_reaction", HierarchyVariant::TimeAndReactionScaled),
                ("time", HierarchyVariant::TimeScaled),
            ],
        )?;
        let h_eps = raw.take_f64("hierarchy.epsilon")?;
        let hierarchy = match (h_variant, h_eps) {
            (None, None) => None,
            (Some((_, variant)), Some((line, epsilon))) => {
                if !(epsilon > 0.0) {
                    return Err(bad(
                        line,
                        format!("`hierarchy.epsilon` must be > 0, got {epsilon}"),
                    ));
                }
                Some(HierarchySpec { variant, epsilon })
            }
            _ => {
                return Err(bad(
                    0,
                    "a hierarchy check needs both hierarchy.variant and hierarchy.epsilon"
                        .to_string(),
                ))
            }
        };

        raw.finish()?;
        Ok(Self {
            entries,
            grid,
            model,
            initial,
            t_end,
            solve_opts,
            idsa_opts,
            sweep,
            hierarchy,
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// The matter model with the configured scaling already applied.
    pub fn model(&self) -> &MatterModel {
        &self.model
    }

    /// The configured initial condition sampled isotropically on the grid.
    pub fn initial_field(&self) -> Result<DistributionField> {
        let mut out = DistributionField::zeros(&self.grid);
        for ir in 0..self.grid.n_r() {
            let f = self.initial.eval(self.grid.r_centers()[ir])?;
            for ig in 0..self.grid.n_omega() {
                for ik in 0..self.grid.n_mu() {
                    out.set(&self.grid, ir, ig, ik, f);
                }
            }
        }
        Ok(out)
    }

    pub fn solve_options(&self) -> SolveOptions {
        self.solve_opts.clone()
    }

    pub fn idsa_options(&self) -> IdsaOptions {
        self.idsa_opts.clone()
    }

    /// Canonical echo of the assignments that produced this scenario,
    /// sorted by key: the reproducibility block run manifests embed.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
