//! Stoichiometry, rate laws, the explicit reaction half-step and its time-step
//! restriction.
//!
//! Rates are evaluated on the positive parts of their arguments and damped by
//! the cut-off `clamp((rho_b - sum c)/eps, 0, 1)`, which switches biomass
//! production off before the solid phase can exceed `rho_b`. The cut-off
//! multiplies the whole rate vector so that every column of the stoichiometry
//! keeps balancing mass.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{pos, pos_deriv, FieldP0};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Solid(usize),
    Substrate(usize),
}

/// Reaction rates `r(c, s)`, all non-negative on admissible states.
pub trait RateLaw: Send + Sync {
    fn n_reactions(&self) -> usize;

    fn rates(&self, c: &[f64], s: &[f64], out: &mut [f64]);

    /// `dc[j][i] = d r_j / d c_i`, `ds[j][i] = d r_j / d s_i`.
    fn rate_jacobian(&self, c: &[f64], s: &[f64], dc: &mut [Vec<f64>], ds: &mut [Vec<f64>]);

    /// `r_j / xi` for a component `xi` consumed by reaction `j`; at `xi = 0`
    /// the limit `d r_j / d xi` is returned.
    fn factored_rate(&self, j: usize, comp: Component, c: &[f64], s: &[f64]) -> f64 {
        let xi = match comp {
            Component::Solid(i) => c[i],
            Component::Substrate(i) => s[i],
        };
        let l = self.n_reactions();
        if xi > 0.0 {
            let mut r = vec![0.0; l];
            self.rates(c, s, &mut r);
            return r[j] / xi;
        }
        let mut dc = vec![vec![0.0; c.len()]; l];
        let mut ds = vec![vec![0.0; s.len()]; l];
        self.rate_jacobian(c, s, &mut dc, &mut ds);
        match comp {
            Component::Solid(i) => dc[j][i],
            Component::Substrate(i) => ds[j][i],
        }
    }
}

/// Law with `l` identically vanishing rates.
#[derive(Clone, Copy, Debug)]
pub struct ZeroRates {
    pub l: usize,
}

impl RateLaw for ZeroRates {
    fn n_reactions(&self) -> usize {
        self.l
    }

    fn rates(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn rate_jacobian(&self, _: &[f64], _: &[f64], dc: &mut [Vec<f64>], ds: &mut [Vec<f64>]) {
        dc.iter_mut().for_each(|r| r.fill(0.0));
        ds.iter_mut().for_each(|r| r.fill(0.0));
    }
}

/// Two-solid, one-substrate Monod kinetics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedBiofilm {
    pub r1: f64,
    pub r2: f64,
    pub k11: f64,
    pub k21: f64,
    pub k12: f64,
    pub k22: f64,
}

impl Default for ReducedBiofilm {
    fn default() -> Self {
        Self {
            r1: 0.0,
            r2: 0.0,
            k11: 2e-2,
            k21: 2e-2,
            k12: 1e-2,
            k22: 4e-2,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl ReducedBiofilm {
    pub fn with_rates(r1: f64, r2: f64) -> Self {
        Self {
            r1,
            r2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r1, self.r2, self.k11, self.k21, self.k12, self.k22];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSpec(format!("reaction constants must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    /// Stoichiometry: solids `(c1, c2)`, substrates `(s1, water)`.
    pub fn sigma_c() -> Vec<Vec<f64>> {
        vec![vec![1.0, -0.5], vec![-0.5, 1.0]]
    }

    /// The water row carries no reactions.
    pub fn sigma_s() -> Vec<Vec<f64>> {
        vec![vec![-0.5, -0.5], vec![0.0, 0.0]]
    }

    pub fn spec(self, rho_b: f64, rho_f: f64) -> Result<ReactionSpec> {
        self.validate()?;
        ReactionSpec::new(Self::sigma_c(), Self::sigma_s(), Arc::new(self), rho_b, rho_f)
    }
}

impl RateLaw for ReducedBiofilm {
    fn n_reactions(&self) -> usize {
        2
    }

    fn rates(&self, c: &[f64], s: &[f64], out: &mut [f64]) {
        let (c1, c2, s1) = (c[0], c[1], s[0]);
        let p = c1 * c2 * s1;
        out[0] = ratio(self.r1 * p, (s1 + self.k11) * (c2 + self.k12));
        out[1] = ratio(self.r2 * p, (s1 + self.k21) * (c1 + self.k22));
    }

    fn rate_jacobian(&self, c: &[f64], s: &[f64], dc: &mut [Vec<f64>], ds: &mut [Vec<f64>]) {
        let (c1, c2, s1) = (c[0], c[1], s[0]);
        let a1 = s1 + self.k11;
        let b1 = c2 + self.k12;
        dc[0][0] = ratio(self.r1 * c2 * s1, a1 * b1);
        dc[0][1] = ratio(self.r1 * c1 * s1 * self.k12, a1 * b1 * b1);
        ds[0][0] = ratio(self.r1 * c1 * c2 * self.k11, a1 * a1 * b1);
        let a2 = s1 + self.k21;
        let b2 = c1 + self.k22;
        dc[1][0] = ratio(self.r2 * c2 * s1 * self.k22, a2 * b2 * b2);
        dc[1][1] = ratio(self.r2 * c1 * s1, a2 * b2);
        ds[1][0] = ratio(self.r2 * c1 * c2 * self.k21, a2 * a2 * b2);
        for r in ds.iter_mut() {
            r.iter_mut().skip(1).for_each(|v| *v = 0.0);
        }
        for r in dc.iter_mut() {
            r.iter_mut().skip(2).for_each(|v| *v = 0.0);
        }
    }

    fn factored_rate(&self, j: usize, comp: Component, c: &[f64], s: &[f64]) -> f64 {
        let (c1, c2, s1) = (c[0], c[1], s[0]);
        match (j, comp) {
            (0, Component::Solid(1)) => ratio(self.r1 * c1 * s1, (s1 + self.k11) * (c2 + self.k12)),
            (0, Component::Substrate(0)) => ratio(self.r1 * c1 * c2, (s1 + self.k11) * (c2 + self.k12)),
            (0, Component::Solid(0)) => ratio(self.r1 * c2 * s1, (s1 + self.k11) * (c2 + self.k12)),
            (1, Component::Solid(0)) => ratio(self.r2 * c2 * s1, (s1 + self.k21) * (c1 + self.k22)),
            (1, Component::Substrate(0)) => ratio(self.r2 * c1 * c2, (s1 + self.k21) * (c1 + self.k22)),
            (1, Component::Solid(1)) => ratio(self.r2 * c1 * s1, (s1 + self.k21) * (c1 + self.k22)),
            _ => 0.0,
        }
    }
}

/// Rates of the reduced model; negative arguments are rejected.
pub fn rate_vector(c: &[f64], s: &[f64], law: &ReducedBiofilm) -> Result<[f64; 2]> {
    if c.len() < 2 || s.is_empty() {
        return Err(Error::InvalidArgument("reduced model needs two solids and one substrate".into()));
    }
    if c.iter().chain(s).any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain(format!("negative concentration in c = {c:?}, s = {s:?}")));
    }
    let mut r = [0.0; 2];
    law.rates(c, s, &mut r);
    Ok(r)
}

#[derive(Clone)]
pub struct ReactionSpec {
    /// `k_b x l`.
    pub sigma_c: Vec<Vec<f64>>,
    /// `k_f x l`.
    pub sigma_s: Vec<Vec<f64>>,
    pub law: Arc<dyn RateLaw>,
    pub rho_b: f64,
    pub rho_f: f64,
    /// Width of the cut-off below `rho_b`.
    pub epsilon: f64,
    /// Maximum of the factored rates over the admissible box (1/s).
    pub bound_r: f64,
    /// Maximum of `|R_c|`, `|R_s|` components over the admissible box.
    pub bound_rmax: f64,
}

impl fmt::Debug for ReactionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReactionSpec")
            .field("sigma_c", &self.sigma_c)
            .field("sigma_s", &self.sigma_s)
            .field("epsilon", &self.epsilon)
            .field("bound_r", &self.bound_r)
            .field("bound_rmax", &self.bound_rmax)
            .finish()
    }
}

fn check_shapes(sigma_c: &[Vec<f64>], sigma_s: &[Vec<f64>], l: usize) -> Result<()> {
    if sigma_c.is_empty() {
        return Err(Error::InvalidSpec("at least one solid component is required".into()));
    }
    for (name, m) in [("sigma_c", sigma_c), ("sigma_s", sigma_s)] {
        for (i, row) in m.iter().enumerate() {
            if row.len() != l {
                return Err(Error::InvalidSpec(format!(
                    "{name} row {i} has {} columns, the rate law has {l} reactions",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} row {i} is not finite")));
            }
        }
    }
    Ok(())
}

/// Axis samples for bound estimation: zero plus a geometric ladder up to `top`.
fn axis(top: f64, n: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    let lo: f64 = 1e-7;
    for i in 0..n {
        v.push(top * lo.powf(1.0 - i as f64 / (n - 1) as f64));
    }
    v
}

fn for_each_grid_point(kb: usize, kf: usize, rho_b: f64, rho_f: f64, mut f: impl FnMut(&[f64], &[f64])) {
    let dims = kb + kf;
    let n = match dims {
        0..=2 => 60,
        3 => 40,
        4 => 24,
        _ => 10,
    };
    let ab = axis(rho_b, n);
    let af = axis(rho_f, n);
    let len = ab.len();
    let mut idx = vec![0usize; dims];
    let mut c = vec![0.0; kb];
    let mut s = vec![0.0; kf];
    loop {
        for i in 0..kb {
            c[i] = ab[idx[i]];
        }
        for i in 0..kf {
            s[i] = af[idx[kb + i]];
        }
        f(&c, &s);
        let mut d = 0;
        loop {
            if d == dims {
                return;
            }
            idx[d] += 1;
            if idx[d] < len {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

impl ReactionSpec {
    /// Checks shapes and estimates `bound_r`, `bound_rmax` by sampling the
    /// admissible box `[0, rho_b]^k_b x [0, rho_f]^k_f`.
    pub fn new(
        sigma_c: Vec<Vec<f64>>,
        sigma_s: Vec<Vec<f64>>,
        law: Arc<dyn RateLaw>,
        rho_b: f64,
        rho_f: f64,
    ) -> Result<Self> {
        let l = law.n_reactions();
        check_shapes(&sigma_c, &sigma_s, l)?;
        if !(rho_b > 0.0 && rho_f > 0.0) {
            return Err(Error::InvalidSpec("densities must be positive".into()));
        }
        let mut spec = Self {
            sigma_c,
            sigma_s,
            law,
            rho_b,
            rho_f,
            epsilon: 1e-3 * rho_b,
            bound_r: 0.0,
            bound_rmax: 0.0,
        };
        spec.estimate_bounds();
        Ok(spec)
    }

    pub fn zero(kb: usize, kf: usize, rho_b: f64, rho_f: f64) -> Result<Self> {
        Self::new(
            vec![vec![0.0]; kb],
            vec![vec![0.0]; kf],
            Arc::new(ZeroRates { l: 1 }),
            rho_b,
            rho_f,
        )
    }

    pub fn kb(&self) -> usize {
        self.sigma_c.len()
    }

    pub fn kf(&self) -> usize {
        self.sigma_s.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.law.n_reactions()
    }

    fn consumers(&self) -> Vec<(usize, Component)> {
        let mut out = Vec::new();
        for j in 0..self.n_reactions() {
            for (i, row) in self.sigma_c.iter().enumerate() {
                if row[j] < 0.0 {
                    out.push((j, Component::Solid(i)));
                }
            }
            for (i, row) in self.sigma_s.iter().enumerate() {
                if row[j] < 0.0 {
                    out.push((j, Component::Substrate(i)));
                }
            }
        }
        out
    }

    fn estimate_bounds(&mut self) {
        let consumers = self.consumers();
        let l = self.n_reactions();
        let mut r = vec![0.0; l];
        let mut bound_r: f64 = 0.0;
        let mut bound_rmax: f64 = 0.0;
        let law = self.law.clone();
        let (sc, ss) = (self.sigma_c.clone(), self.sigma_s.clone());
        for_each_grid_point(self.kb(), self.kf(), self.rho_b, self.rho_f, |c, s| {
            for &(j, comp) in &consumers {
                bound_r = bound_r.max(law.factored_rate(j, comp, c, s));
            }
            law.rates(c, s, &mut r);
            for row in sc.iter().chain(&ss) {
                let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
                bound_rmax = bound_rmax.max(v.abs());
            }
        });
        self.bound_r = bound_r;
        self.bound_rmax = bound_rmax;
    }

    /// `max_k sum_{j: sigma_kj < 0} (-sigma_kj)` for both matrices.
    pub fn lambda_bounds(&self) -> (f64, f64) {
        let f = |m: &[Vec<f64>]| {
            m.iter()
                .map(|row| row.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>())
                .fold(0.0, f64::max)
        };
        (f(&self.sigma_c), f(&self.sigma_s))
    }

    /// Cut-off factor and its derivative with respect to `sum c`.
    pub fn cutoff(&self, sum_c: f64) -> (f64, f64) {
        let x = (self.rho_b - sum_c) / self.epsilon;
        if x >= 1.0 {
            (1.0, 0.0)
        } else if x <= 0.0 {
            (0.0, 0.0)
        } else {
            (x, -1.0 / self.epsilon)
        }
    }

    /// Effective rates `chi(sum c+) r(c+, s+)`.
    pub fn effective_rates(&self, c: &[f64], s: &[f64], out: &mut [f64]) {
        let cp: Vec<f64> = c.iter().map(|v| pos(*v)).collect();
        let sp: Vec<f64> = s.iter().map(|v| pos(*v)).collect();
        self.law.rates(&cp, &sp, out);
        let (chi, _) = self.cutoff(cp.iter().sum());
        out.iter_mut().for_each(|r| *r *= chi);
    }

    /// Jacobian of [`Self::effective_rates`].
    pub fn effective_rate_jacobian(&self, c: &[f64], s: &[f64], dc: &mut [Vec<f64>], ds: &mut [Vec<f64>]) {
        let cp: Vec<f64> = c.iter().map(|v| pos(*v)).collect();
        let sp: Vec<f64> = s.iter().map(|v| pos(*v)).collect();
        let l = self.n_reactions();
        let mut r = vec![0.0; l];
        self.law.rates(&cp, &sp, &mut r);
        self.law.rate_jacobian(&cp, &sp, dc, ds);
        let (chi, dchi) = self.cutoff(cp.iter().sum());
        for j in 0..l {
            for (i, v) in dc[j].iter_mut().enumerate() {
                *v = (chi * *v + dchi * r[j]) * pos_deriv(c[i]);
            }
            for (i, v) in ds[j].iter_mut().enumerate() {
                *v = chi * *v * pos_deriv(s[i]);
            }
        }
    }

    /// Applies one explicit reaction update to a single cell. Returns the new
    /// `(c, s, u)`; the `u` update is computed from `u_hat` independently of
    /// the solid components.
    pub fn update_cell(&self, c_hat: &[f64], s_hat: &[f64], u_hat: f64, dt: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let mut r = vec![0.0; self.n_reactions()];
        self.effective_rates(c_hat, s_hat, &mut r);
        let mut r_tilde = 0.0;
        let c = self
            .sigma_c
            .iter()
            .zip(c_hat)
            .map(|(row, ch)| {
                let rc: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
                r_tilde += rc;
                ch + dt * rc
            })
            .collect();
        let s = self
            .sigma_s
            .iter()
            .zip(s_hat)
            .map(|(row, sh)| sh + dt * row.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        (c, s, u_hat + dt * r_tilde)
    }
}

/// `min{1 / (lambda_max R), eps / (k_b R_max)}`; vanishing pieces are unbounded.
pub fn cfl_bound(lambda_max: f64, bound_r: f64, epsilon: f64, kb: usize, bound_rmax: f64) -> f64 {
    let a = if lambda_max * bound_r > 0.0 {
        1.0 / (lambda_max * bound_r)
    } else {
        f64::INFINITY
    };
    let b = if bound_rmax > 0.0 {
        epsilon / (kb as f64 * bound_rmax)
    } else {
        f64::INFINITY
    };
    a.min(b)
}

/// Largest admissible step of the explicit reaction update; `INFINITY` when
/// all rates vanish.
pub fn cfl_max_dt(spec: &ReactionSpec, kb: usize) -> f64 {
    let (lc, ls) = spec.lambda_bounds();
    cfl_bound(lc.max(ls), spec.bound_r, spec.epsilon, kb, spec.bound_rmax)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    /// Column sums of the stacked stoichiometry.
    pub column_sums: Vec<f64>,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks mass balance of the stoichiometry and samples the rate law for
/// non-negativity and for vanishing consumption of absent components.
pub fn validate_spec(spec: &ReactionSpec) -> Result<ValidationReport> {
    let l = spec.n_reactions();
    check_shapes(&spec.sigma_c, &spec.sigma_s, l)?;
    let mut report = ValidationReport::default();
    for j in 0..l {
        let sum: f64 = spec.sigma_c.iter().chain(&spec.sigma_s).map(|row| row[j]).sum();
        report.column_sums.push(sum);
        if sum.abs() > 1e-12 {
            report
                .violations
                .push(format!("stoichiometry column {j} sums to {sum:e}, mass is not conserved"));
        }
    }

    let (kb, kf) = (spec.kb(), spec.kf());
    let consumers = spec.consumers();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut r = vec![0.0; l];
    let mut negative = 0usize;
    let mut nonzero = 0usize;
    for _ in 0..2000 {
        let c: Vec<f64> = (0..kb).map(|_| spec.rho_b * rng.gen::<f64>()).collect();
        let s: Vec<f64> = (0..kf).map(|_| spec.rho_f * rng.gen::<f64>()).collect();
        spec.law.rates(&c, &s, &mut r);
        negative += r.iter().filter(|v| !(**v >= 0.0)).count();
        for &(j, comp) in &consumers {
            let (mut c0, mut s0) = (c.clone(), s.clone());
            match comp {
                Component::Solid(i) => c0[i] = 0.0,
                Component::Substrate(i) => s0[i] = 0.0,
            }
            spec.law.rates(&c0, &s0, &mut r);
            if r[j] != 0.0 {
                nonzero += 1;
            }
        }
    }
    if negative > 0 {
        report
            .violations
            .push(format!("{negative} negative rate samples on the admissible box"));
    }
    if nonzero > 0 {
        report.violations.push(format!(
            "{nonzero} samples where a reaction consumes a component that is absent"
        ));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReactionOutput {
    pub c: Vec<FieldP0>,
    pub s: Vec<FieldP0>,
    pub u: FieldP0,
}

/// Cellwise explicit reaction update, rejected when `dt` exceeds the bound.
pub fn reaction_step(
    c_hat: &[FieldP0],
    s_hat: &[FieldP0],
    u_hat: &FieldP0,
    dt: f64,
    spec: &ReactionSpec,
) -> Result<ReactionOutput> {
    let bound = cfl_max_dt(spec, spec.kb());
    if dt > bound {
        return Err(Error::StepRejected(format!(
            "dt = {dt:e} exceeds the reaction bound {bound:e}"
        )));
    }
    reaction_step_unchecked(c_hat, s_hat, u_hat, dt, spec)
}

/// Same as [`reaction_step`] without the time-step gate.
pub fn reaction_step_unchecked(
    c_hat: &[FieldP0],
    s_hat: &[FieldP0],
    u_hat: &FieldP0,
    dt: f64,
    spec: &ReactionSpec,
) -> Result<ReactionOutput> {
    if c_hat.len() != spec.kb() || s_hat.len() != spec.kf() {
        return Err(Error::InvalidArgument(format!(
            "expected {} solids and {} substrates, got {} and {}",
            spec.kb(),
            spec.kf(),
            c_hat.len(),
            s_hat.len()
        )));
    }
    let n = u_hat.len();
    if c_hat.iter().chain(s_hat).any(|f| f.len() != n) {
        return Err(Error::InvalidArgument("component fields differ in length".into()));
    }
    let mut c: Vec<FieldP0> = (0..spec.kb()).map(|_| FieldP0::new(vec![0.0; n])).collect();
    let mut s: Vec<FieldP0> = (0..spec.kf()).map(|_| FieldP0::new(vec![0.0; n])).collect();
    let mut u = FieldP0::new(vec![0.0; n]);
    let mut ck = vec![0.0; spec.kb()];
    let mut sk = vec![0.0; spec.kf()];
    for k in 0..n {
        for (dst, f) in ck.iter_mut().zip(c_hat) {
            *dst = f.values[k];
        }
        for (dst, f) in sk.iter_mut().zip(s_hat) {
            *dst = f.values[k];
        }
        if ck.iter().chain(&sk).any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain(format!("negative concentration in cell {k}")));
        }
        let (cn, sn, un) = spec.update_cell(&ck, &sk, u_hat.values[k], dt);
        for (f, v) in c.iter_mut().zip(cn) {
            f.values[k] = v;
        }
        for (f, v) in s.iter_mut().zip(sn) {
            f.values[k] = v;
        }
        u.values[k] = un;
    }
    Ok(ReactionOutput { c, s, u })
}

/// Random admissible `(c, s)` with `sum c <= rho_b`, log-uniform magnitudes so
/// that near-empty components are well represented.
pub fn sample_admissible<R: Rng + ?Sized>(
    rng: &mut R,
    kb: usize,
    kf: usize,
    rho_b: f64,
    rho_f: f64,
) -> (Vec<f64>, Vec<f64>) {
    fn draw<R: Rng + ?Sized>(top: f64, rng: &mut R) -> f64 {
        match rng.gen_range(0..8) {
            0 => 0.0,
            1..=3 => top * rng.gen::<f64>(),
            _ => top * 10f64.powf(-9.0 * rng.gen::<f64>()),
        }
    }
    let u = draw(rho_b, rng);
    let w: Vec<f64> = (0..kb).map(|_| draw(1.0, rng)).collect();
    let total: f64 = w.iter().sum();
    let c = if total > 0.0 {
        w.iter().map(|x| u * x / total).collect()
    } else {
        vec![0.0; kb]
    };
    let s = (0..kf).map(|_| draw(rho_f, rng)).collect();
    (c, s)
}
