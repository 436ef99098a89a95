//! Annealed Gauss-Newton minimisation with finite-difference Jacobians.
//!
//! Each iteration solves the damped normal equations
//! `(J^T J + lambda I) d = J^T r` and moves `phi <- phi - eta d`, with
//! `eta` decaying geometrically. A step that raises the energy is retried
//! with half the step length, so accepted energies never increase.

mod cache;
mod init;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use cache::TextureCache;
pub use init::{initialize, kabsch, Initialization};

use crate::energy::{EnergyBreakdown, EnergyContext, Evaluation, ResidualLayout, Terms};
use crate::error::{Error, Result};
use crate::model::params::index;
use crate::model::{param_group, param_name, ParamGroup, ParamMask, ParameterVector, PARAM_COUNT};

/// Central-difference step per parameter group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub pca: f64,
    pub iris_scale: f64,
    /// Head rotation and light direction, radians.
    pub angle: f64,
    /// Eye rotation and eyelid, radians. Larger than `angle` because the
    /// eyeball is small: the step should move the iris by about a pixel.
    pub gaze: f64,
    /// Millimetres; also used for the interocular distance.
    pub translation: f64,
    pub color: f64,
    pub intensity: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            pca: 0.05,
            iris_scale: 0.02,
            angle: 0.5f64.to_radians(),
            gaze: 2f64.to_radians(),
            translation: 0.5,
            color: 0.02,
            intensity: 0.02,
        }
    }
}

impl StepSizes {
    pub fn for_param(&self, i: usize) -> f64 {
        match param_group(i) {
            ParamGroup::Pca => self.pca,
            ParamGroup::IrisScale => self.iris_scale,
            ParamGroup::Color => self.color,
            ParamGroup::Angle => self.angle,
            ParamGroup::Gaze => self.gaze,
            ParamGroup::Translation | ParamGroup::Distance => self.translation,
            ParamGroup::Intensity => self.intensity,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.pca, self.iris_scale, self.angle, self.gaze, self.translation, self.color, self.intensity];
        if all.iter().all(|h| h.is_finite() && *h > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "step sizes",
                reason: format!("all steps must be positive: {self:?}"),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Initial step scale.
    pub eta: f64,
    /// Per-iteration multiplier on `eta`.
    pub eta_decay: f64,
    pub steps: StepSizes,
    pub mask: ParamMask,
    /// Stop once an accepted step lowers the energy by less than this
    /// fraction.
    pub convergence: f64,
    /// Relative damping; `lambda = damping * trace(J^T J) / n`.
    pub damping: f64,
    /// Step halvings tried before an iteration is abandoned.
    pub max_halvings: usize,
    /// Iterations of a landmark-only rigid alignment (head rotation,
    /// translation, interocular distance) run before the joint fit. The
    /// aligned pose is kept only if it lowers the full energy; it then
    /// counts as the first iteration.
    pub rigid_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            eta: 1.0,
            eta_decay: 0.9,
            steps: StepSizes::default(),
            mask: ParamMask::all(),
            convergence: 1e-3,
            damping: 1e-6,
            max_halvings: 4,
            rigid_iterations: 5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidParameter {
                name: "fit config",
                reason,
            })
        };
        if !(1..=100).contains(&self.max_iterations) {
            return bad(format!("max_iterations must be in 1..=100, got {}", self.max_iterations));
        }
        if self.mask.is_empty() {
            return bad("parameter mask is empty".into());
        }
        if !(self.eta.is_finite() && self.eta > 0.0 && self.eta_decay > 0.0 && self.eta_decay <= 1.0) {
            return bad(format!("annealing schedule {} x {} is invalid", self.eta, self.eta_decay));
        }
        if !(self.convergence >= 0.0 && self.damping >= 0.0 && self.damping.is_finite()) {
            return bad("convergence threshold and damping must be non-negative".into());
        }
        self.steps.validate()
    }
}

/// One row of the optimisation log. Row 0 is the starting point.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    pub phi: ParameterVector,
    pub step_norm: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    pub entries: Vec<TraceEntry>,
}

impl FitTrace {
    /// Number of accepted iterations.
    pub fn iterations(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy.total).collect()
    }

    /// Whitespace separated table: iteration, four terms, total, step norm, eta.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# iteration e_img e_ldmks e_stats e_pose total step_norm eta\n");
        for e in &self.entries {
            let b = &e.energy;
            s.push_str(&format!(
                "{} {:e} {:e} {:e} {:e} {:e} {:e} {:e}\n",
                e.iteration, b.e_img, b.e_ldmks, b.e_stats, b.e_pose, b.total, e.step_norm, e.eta
            ));
        }
        s
    }
}

/// A residual function the solver can minimise.
pub trait LeastSquares: Sync {
    /// Residuals at `phi`; this fixes the row layout for differentiation.
    fn evaluate(&self, phi: &ParameterVector) -> Result<Evaluation>;

    /// Residuals at `phi` in the row layout of `base`.
    fn evaluate_aligned(&self, phi: &ParameterVector, base: &Evaluation, out: &mut [f64]) -> Result<()>;

    /// A cheaper problem for the rigid pre-alignment, if there is one.
    fn rigid_stage(&self) -> Option<Box<dyn LeastSquares + '_>> {
        None
    }
}

/// The fitting energy of one observation.
pub struct FitProblem<'a> {
    pub context: EnergyContext<'a>,
    cache: TextureCache,
}

impl<'a> FitProblem<'a> {
    pub fn new(context: EnergyContext<'a>) -> Self {
        Self {
            context,
            cache: TextureCache::default(),
        }
    }

    pub fn texture(&self, phi: &ParameterVector) -> Result<Arc<crate::Texture>> {
        self.cache.get(self.context.model, &phi.texture)
    }
}

impl LeastSquares for FitProblem<'_> {
    fn evaluate(&self, phi: &ParameterVector) -> Result<Evaluation> {
        self.context.evaluate(phi, &self.texture(phi)?)
    }

    fn evaluate_aligned(&self, phi: &ParameterVector, base: &Evaluation, out: &mut [f64]) -> Result<()> {
        self.context.evaluate_aligned(phi, &self.texture(phi)?, base, out)
    }

    fn rigid_stage(&self) -> Option<Box<dyn LeastSquares + '_>> {
        if !self.context.terms.landmarks {
            return None;
        }
        let context = EnergyContext {
            terms: Terms {
                image: false,
                landmarks: true,
                stats: false,
                pose: false,
            },
            ..self.context
        };
        Some(Box::new(FitProblem::new(context)))
    }
}

/// Column-stored Jacobian over the masked parameters.
#[derive(Clone, Debug)]
pub struct Jacobian {
    pub params: Vec<usize>,
    pub columns: Vec<Vec<f64>>,
}

impl Jacobian {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column_for(&self, param: usize) -> Option<&[f64]> {
        self.params.iter().position(|p| *p == param).map(|k| self.columns[k].as_slice())
    }
}

fn perturbed(phi: &ParameterVector, i: usize, delta: f64) -> ParameterVector {
    let mut a = phi.to_array();
    a[i] += delta;
    ParameterVector::from_slice(&a).expect("length is fixed")
}

/// Central-difference column `(r(phi + h e_k) - r(phi - h e_k)) / 2h` in the
/// row layout of `base`.
pub fn jacobian_column(problem: &dyn LeastSquares, phi: &ParameterVector, param: usize, h: f64, base: &Evaluation) -> Result<Vec<f64>> {
    let wrap = |source: Error| Error::Jacobian {
        index: param,
        name: param_name(param),
        source: Box::new(source),
    };
    let n = base.residuals.len();
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    problem.evaluate_aligned(&perturbed(phi, param, h), base, &mut plus).map_err(wrap)?;
    problem.evaluate_aligned(&perturbed(phi, param, -h), base, &mut minus).map_err(wrap)?;
    let inv = 0.5 / h;
    Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) * inv).collect())
}

/// Jacobian columns for every parameter in `mask`, evaluated in parallel.
pub fn jacobian(problem: &dyn LeastSquares, phi: &ParameterVector, mask: ParamMask, steps: &StepSizes, base: &Evaluation) -> Result<Jacobian> {
    let params = mask.indices();
    let columns = params
        .par_iter()
        .map(|&k| jacobian_column(problem, phi, k, steps.for_param(k), base))
        .collect::<Result<Vec<_>>>()?;
    Ok(Jacobian { params, columns })
}

/// Damped Gauss-Newton step `-eta (J^T J + lambda I)^-1 J^T r` with
/// `lambda = damping * trace(J^T J) / n`.
pub fn gauss_newton_step(jac: &Jacobian, r: &[f64], eta: f64, damping: f64) -> Result<Vec<f64>> {
    let n = jac.columns.len();
    let mut jtj = DMatrix::<f64>::zeros(n, n);
    let mut jtr = DVector::<f64>::zeros(n);
    for a in 0..n {
        let ca = &jac.columns[a];
        jtr[a] = dot(ca, r);
        for b in a..n {
            let v = dot(ca, &jac.columns[b]);
            jtj[(a, b)] = v;
            jtj[(b, a)] = v;
        }
    }
    if jtr.iter().all(|v| *v == 0.0) || eta == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let lambda = damping * jtj.trace() / n as f64;
    for a in 0..n {
        jtj[(a, a)] += lambda;
    }
    let chol = jtj.cholesky().ok_or(Error::Singular)?;
    let d = chol.solve(&jtr);
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(d.iter().map(|v| -eta * v).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds `step` to the masked parameters and projects them onto the valid
/// box. Unmasked parameters are untouched bit for bit.
fn apply_step(phi: &ParameterVector, params: &[usize], step: &[f64]) -> ParameterVector {
    let mut a = phi.to_array();
    for (k, &i) in params.iter().enumerate() {
        a[i] += step[k];
    }
    let mut moved = ParameterVector::from_slice(&a).expect("length is fixed");
    moved.clamp_to_valid();
    let clamped = moved.to_array();
    for &i in params {
        a[i] = clamped[i];
    }
    ParameterVector::from_slice(&a).expect("length is fixed")
}

/// Minimises `problem` from `init`. Returns the best parameters seen and the
/// log of accepted iterations.
pub fn fit(problem: &dyn LeastSquares, init: &ParameterVector, config: &FitConfig) -> Result<(ParameterVector, FitTrace)> {
    config.validate()?;
    let mut phi = init.clone();
    let mut current = problem.evaluate(&phi)?;
    let mut trace = FitTrace {
        entries: vec![TraceEntry {
            iteration: 0,
            energy: current.breakdown,
            phi: phi.clone(),
            step_norm: 0.0,
            eta: 0.0,
        }],
    };
    debug_assert!(PARAM_COUNT <= 64);
    let mut first = 0;
    if let Some((aligned, ev)) = rigid_prealign(problem, &phi, &current, config)? {
        let step_norm = aligned
            .to_array()
            .iter()
            .zip(phi.to_array())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        phi = aligned;
        current = ev;
        trace.entries.push(TraceEntry {
            iteration: 1,
            energy: current.breakdown,
            phi: phi.clone(),
            step_norm,
            eta: config.eta,
        });
        first = 1;
    }
    for it in first..config.max_iterations {
        let energy = current.breakdown.total;
        if energy == 0.0 {
            break;
        }
        let jac = jacobian(problem, &phi, config.mask, &config.steps, &current)?;
        let mut eta = config.eta * config.eta_decay.powi(it as i32);
        let mut damping = config.damping;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let step = match gauss_newton_step(&jac, &current.residuals, eta, damping) {
                Ok(s) => s,
                Err(Error::Singular) => {
                    log::debug!("singular normal equations at iteration {it}; raising damping");
                    damping = (damping * 10.0).max(1e-9);
                    eta *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let candidate = apply_step(&phi, &jac.params, &step);
            match problem.evaluate(&candidate) {
                Ok(ev) if ev.breakdown.total <= energy => {
                    let norm = dot(&step, &step).sqrt();
                    accepted = Some((candidate, ev, norm, eta));
                    break;
                }
                Ok(_) => {}
                Err(e) if e.is_numerical() => log::debug!("rejected step at iteration {it}: {e}"),
                Err(e) => return Err(e),
            }
            eta *= 0.5;
        }
        let Some((next, ev, step_norm, eta_used)) = accepted else {
            log::debug!("no descent step at iteration {it}; stopping");
            break;
        };
        let decrease = (energy - ev.breakdown.total) / energy;
        phi = next;
        current = ev;
        trace.entries.push(TraceEntry {
            iteration: it + 1,
            energy: current.breakdown,
            phi: phi.clone(),
            step_norm,
            eta: eta_used,
        });
        if decrease < config.convergence {
            break;
        }
    }
    Ok((phi, trace))
}

/// Landmark-only rigid alignment. Returns the aligned parameters and their
/// full evaluation when they lower the energy.
fn rigid_prealign(problem: &dyn LeastSquares, phi: &ParameterVector, current: &Evaluation, config: &FitConfig) -> Result<Option<(ParameterVector, Evaluation)>> {
    if config.rigid_iterations == 0 || current.breakdown.total == 0.0 {
        return Ok(None);
    }
    let rigid = ParamMask::from_indices(
        index::ROTATION
            .chain(index::TRANSLATION)
            .chain([index::IOD])
            .filter(|i| config.mask.contains(*i)),
    );
    let Some(stage) = problem.rigid_stage() else {
        return Ok(None);
    };
    if rigid.is_empty() {
        return Ok(None);
    }
    let stage_config = FitConfig {
        max_iterations: config.rigid_iterations,
        mask: rigid,
        rigid_iterations: 0,
        ..config.clone()
    };
    let aligned = match fit(stage.as_ref(), phi, &stage_config) {
        Ok((aligned, _)) => aligned,
        Err(e) if e.is_numerical() => return Ok(None),
        Err(e) => return Err(e),
    };
    match problem.evaluate(&aligned) {
        Ok(ev) if ev.breakdown.total <= current.breakdown.total => Ok(Some((aligned, ev))),
        Ok(_) => Ok(None),
        Err(e) if e.is_numerical() => Ok(None),
        Err(e) => Err(e),
    }
}

/// An evaluation carrying only raw residuals, for problems without the
/// energy's row structure.
pub fn plain_evaluation(residuals: Vec<f64>) -> Evaluation {
    let total = dot(&residuals, &residuals);
    Evaluation {
        layout: ResidualLayout::plain(residuals.len()),
        residuals,
        breakdown: EnergyBreakdown {
            total,
            ..EnergyBreakdown::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `r(phi) = A x - b` over the first few parameters.
    struct Linear {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    }

    impl Linear {
        fn residuals(&self, phi: &ParameterVector) -> Vec<f64> {
            let x = phi.to_array();
            self.a.iter().zip(&self.b).map(|(row, b)| dot(row, &x[..row.len()]) - b).collect()
        }
    }

    impl LeastSquares for Linear {
        fn evaluate(&self, phi: &ParameterVector) -> Result<Evaluation> {
            Ok(plain_evaluation(self.residuals(phi)))
        }

        fn evaluate_aligned(&self, phi: &ParameterVector, _: &Evaluation, out: &mut [f64]) -> Result<()> {
            out.copy_from_slice(&self.residuals(phi));
            Ok(())
        }
    }

    fn fixture() -> Linear {
        Linear {
            a: vec![vec![2.0, 1.0, 0.0], vec![0.5, 3.0, 1.0], vec![1.0, 0.0, 4.0], vec![1.0, 1.0, 1.0]],
            b: vec![1.0, -2.0, 0.5, 3.0],
        }
    }

    fn mask3() -> ParamMask {
        ParamMask::from_indices(0..3)
    }

    #[test]
    fn linear_problem_solved_in_one_step() {
        let p = fixture();
        let phi = ParameterVector::default();
        let base = p.evaluate(&phi).unwrap();
        let jac = jacobian(&p, &phi, mask3(), &StepSizes::default(), &base).unwrap();
        let step = gauss_newton_step(&jac, &base.residuals, 1.0, 0.0).unwrap();
        let next = apply_step(&phi, &jac.params, &step);
        // The gradient vanishes at the least-squares minimiser.
        let r = p.residuals(&next);
        for col in 0..3 {
            let g: f64 = p.a.iter().zip(&r).map(|(row, ri)| row[col] * ri).sum();
            assert!(g.abs() < 1e-10, "gradient {g}");
        }
    }

    #[test]
    fn zero_eta_gives_zero_step() {
        let p = fixture();
        let phi = ParameterVector::default();
        let base = p.evaluate(&phi).unwrap();
        let jac = jacobian(&p, &phi, mask3(), &StepSizes::default(), &base).unwrap();
        assert!(gauss_newton_step(&jac, &base.residuals, 0.0, 1e-6).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn heavy_damping_follows_the_gradient() {
        let p = fixture();
        let phi = ParameterVector::default();
        let base = p.evaluate(&phi).unwrap();
        let jac = jacobian(&p, &phi, mask3(), &StepSizes::default(), &base).unwrap();
        let step = gauss_newton_step(&jac, &base.residuals, 1.0, 1e9).unwrap();
        let grad: Vec<f64> = jac.columns.iter().map(|c| -dot(c, &base.residuals)).collect();
        let cos = dot(&step, &grad) / (dot(&step, &step).sqrt() * dot(&grad, &grad).sqrt());
        assert!(cos > 1.0 - 1e-9, "cosine {cos}");
    }

    #[test]
    fn zero_residual_converges_immediately() {
        let mut p = fixture();
        let phi = ParameterVector::default();
        p.b = p.residuals(&phi).iter().zip(&p.b).map(|(r, b)| r + b).collect();
        let (out, trace) = fit(&p, &phi, &FitConfig { mask: mask3(), ..FitConfig::default() }).unwrap();
        assert_eq!(out, phi);
        assert_eq!(trace.entries.len(), 1);
    }

    #[test]
    fn fit_is_monotone_and_respects_mask() {
        let p = fixture();
        let phi = ParameterVector::default();
        let config = FitConfig {
            mask: ParamMask::from_indices([0, 2]),
            ..FitConfig::default()
        };
        let (out, trace) = fit(&p, &phi, &config).unwrap();
        assert_eq!(out.to_array()[1].to_bits(), phi.to_array()[1].to_bits());
        assert_eq!(out.to_array()[3..], phi.to_array()[3..]);
        for w in trace.energies().windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(trace.entries.len() <= config.max_iterations + 1);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        assert!(FitConfig { max_iterations: 0, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig { mask: ParamMask::none(), ..FitConfig::default() }.validate().is_err());
        let mut steps = StepSizes::default();
        steps.angle = 0.0;
        assert!(FitConfig { steps, ..FitConfig::default() }.validate().is_err());
    }
}
