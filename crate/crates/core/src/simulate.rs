//! Monte-Carlo simulation of the closed loop: plant, certainty-equivalent
//! controllers, jump estimators and Bernoulli schedulers.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the seed, with
//! one stream per `(ensemble member, purpose)`. Scheduling and noise draws are
//! therefore independent, and a member's path does not depend on how many
//! threads ran the ensemble.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::SchedulingPolicy;
use crate::error::SimulationError;
use crate::linalg::{self, Mat};
use crate::model::{expm::expm, noise_gramian, CommCosts, GameSpec};
use crate::riccati::RiccatiSolution;
use crate::scheduler::CostPair;

/// Fraction of ticks discarded before accumulating statistics.
pub const DEFAULT_BURN_IN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Euler–Maruyama at the tick length, inputs held over the step.
    #[default]
    EulerMaruyama,
    /// Exact Gaussian transition of the joint plant/estimator state.
    Exact,
}

#[derive(Clone, Copy)]
enum Stream {
    Noise = 0,
    Sched1 = 1,
    Sched2 = 2,
    Initial = 3,
}

fn stream(seed: u64, member: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member * 4 + purpose as u64);
    rng
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Per-tick state of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: DVector<f64>,
    pub xhat1: DVector<f64>,
    pub xhat2: DVector<f64>,
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
    pub gamma1: bool,
    pub gamma2: bool,
}

/// Precomputed closed-loop matrices.
struct Plant {
    h: f64,
    scheme: Scheme,
    p_transmit: f64,
    q_transmit: f64,
    a: Mat,
    b1: Mat,
    b2: Mat,
    /// `G √h`
    g_step: Mat,
    /// `R1⁻¹ B1ᵀ P`
    k1: Mat,
    /// `R2⁻¹ B2ᵀ P`
    k2: Mat,
    /// `exp(Ã h)`
    est: Mat,
    /// exact scheme: `exp(F h)` and a square root of the x-block noise
    joint: Mat,
    joint_noise: Mat,
    x0_sqrt: Mat,
}

impl Plant {
    fn new(
        spec: &GameSpec,
        ric: &RiccatiSolution,
        policy: SchedulingPolicy,
        scheme: Scheme,
    ) -> Result<Self, SimulationError> {
        let n = spec.n();
        let h = spec.h;
        let gain = |r: &Mat, b: &Mat| -> Result<Mat, SimulationError> {
            if b.ncols() == 0 {
                return Ok(Mat::zeros(0, n));
            }
            r.clone()
                .lu()
                .solve(&(b.transpose() * &ric.p))
                .ok_or_else(|| SimulationError::Domain("input weight is singular".into()))
        };
        let k1 = gain(&spec.r1, &spec.b1)?;
        let k2 = gain(&spec.r2, &spec.b2)?;
        let est = expm(&(&ric.atilde * h));
        let (joint, joint_noise) = match scheme {
            Scheme::EulerMaruyama => (Mat::zeros(0, 0), Mat::zeros(0, 0)),
            Scheme::Exact => {
                // z = [x; x̂1; x̂2],  ż = F z + [G; 0; 0] w
                let mut f = Mat::zeros(3 * n, 3 * n);
                f.view_mut((0, 0), (n, n)).copy_from(&spec.a);
                f.view_mut((0, n), (n, n)).copy_from(&(-(&spec.b1 * &k1)));
                f.view_mut((0, 2 * n), (n, n)).copy_from(&(&spec.b2 * &k2));
                f.view_mut((n, n), (n, n)).copy_from(&ric.atilde);
                f.view_mut((2 * n, 2 * n), (n, n)).copy_from(&ric.atilde);
                let mut gz = Mat::zeros(3 * n, spec.g.ncols());
                gz.view_mut((0, 0), spec.g.shape()).copy_from(&spec.g);
                let cov = noise_gramian(&f, &(&gz * gz.transpose()), h);
                // only the x block is excited
                let xx = cov.view((0, 0), (n, n)).into_owned();
                let root = linalg::psd_sqrt(&xx, 1e-9 * (1.0 + xx.amax()))
                    .ok_or_else(|| SimulationError::Domain("step noise covariance is not PSD".into()))?;
                (expm(&(f * h)), root)
            }
        };
        let x0_sqrt =
            linalg::psd_sqrt(&spec.sigma0, 1e-10).ok_or_else(|| SimulationError::Domain("Sigma0 is not PSD".into()))?;
        Ok(Self {
            h,
            scheme,
            p_transmit: 1.0 - policy.p,
            q_transmit: 1.0 - policy.q,
            a: spec.a.clone(),
            b1: spec.b1.clone(),
            b2: spec.b2.clone(),
            g_step: &spec.g * h.sqrt(),
            k1,
            k2,
            est,
            joint,
            joint_noise,
            x0_sqrt,
        })
    }

    fn n(&self) -> usize {
        self.a.nrows()
    }
}

/// Iterator over the ticks of one ensemble member.
struct Run<'a> {
    plant: &'a Plant,
    noise: ChaCha8Rng,
    sched1: ChaCha8Rng,
    sched2: ChaCha8Rng,
    x: DVector<f64>,
    xhat1: DVector<f64>,
    xhat2: DVector<f64>,
}

impl<'a> Run<'a> {
    fn new(plant: &'a Plant, seed: u64, member: u64) -> Self {
        let n = plant.n();
        let mut init = stream(seed, member, Stream::Initial);
        let x = &plant.x0_sqrt * normal_vec(&mut init, n);
        Self {
            plant,
            noise: stream(seed, member, Stream::Noise),
            sched1: stream(seed, member, Stream::Sched1),
            sched2: stream(seed, member, Stream::Sched2),
            x,
            // nothing has been transmitted before the first tick
            xhat1: DVector::zeros(n),
            xhat2: DVector::zeros(n),
        }
    }

    /// Draws this tick's scheduling actions, applies the resets, records the
    /// sample and advances everything by one step.
    fn tick(&mut self) -> Sample {
        let pl = self.plant;
        let gamma1 = self.sched1.random::<f64>() < pl.p_transmit;
        let gamma2 = self.sched2.random::<f64>() < pl.q_transmit;
        if gamma1 {
            self.xhat1.copy_from(&self.x);
        }
        if gamma2 {
            self.xhat2.copy_from(&self.x);
        }
        let u1 = -(&pl.k1 * &self.xhat1);
        let u2 = &pl.k2 * &self.xhat2;
        let sample = Sample {
            x: self.x.clone(),
            xhat1: self.xhat1.clone(),
            xhat2: self.xhat2.clone(),
            u1: u1.clone(),
            u2: u2.clone(),
            gamma1,
            gamma2,
        };
        let n = pl.n();
        match pl.scheme {
            Scheme::EulerMaruyama => {
                let w = normal_vec(&mut self.noise, pl.g_step.ncols());
                let drift = &pl.a * &self.x + &pl.b1 * &u1 + &pl.b2 * &u2;
                self.x += drift * pl.h + &pl.g_step * w;
                self.xhat1 = &pl.est * &self.xhat1;
                self.xhat2 = &pl.est * &self.xhat2;
            }
            Scheme::Exact => {
                let mut z = DVector::zeros(3 * n);
                z.rows_mut(0, n).copy_from(&self.x);
                z.rows_mut(n, n).copy_from(&self.xhat1);
                z.rows_mut(2 * n, n).copy_from(&self.xhat2);
                let mut next = &pl.joint * z;
                let w = normal_vec(&mut self.noise, n);
                let kick = &pl.joint_noise * w;
                next.rows_mut(0, n).zip_apply(&kick, |a, b| *a += b);
                self.x = next.rows(0, n).into_owned();
                self.xhat1 = next.rows(n, n).into_owned();
                self.xhat2 = next.rows(2 * n, n).into_owned();
            }
        }
        sample
    }
}

/// Number of ticks in `horizon`, which must be a positive multiple of `h`.
pub fn tick_count(horizon: f64, h: f64) -> Result<usize, SimulationError> {
    if !(horizon > 0.0 && h > 0.0) {
        return Err(SimulationError::Domain(format!(
            "horizon {horizon} and step {h} must be positive"
        )));
    }
    let k = (horizon / h).round();
    if (k * h - horizon).abs() > 1e-9 * horizon {
        return Err(SimulationError::Domain(format!(
            "horizon {horizon} is not a multiple of h = {h}"
        )));
    }
    Ok(k as usize)
}

/// Shortest round-trip decimal form, with `-0` written as `0`.
pub fn csv_number(x: f64) -> String {
    (x + 0.0).to_string()
}

/// One closed-loop run sampled at every tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub h: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xhat1: Vec<Vec<f64>>,
    pub xhat2: Vec<Vec<f64>>,
    pub e1: Vec<Vec<f64>>,
    pub e2: Vec<Vec<f64>>,
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
    pub gamma1: Vec<bool>,
    pub gamma2: Vec<bool>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Transmissions `(n1, n2)` over the run.
    pub fn counts(&self) -> (usize, usize) {
        (
            self.gamma1.iter().filter(|&&g| g).count(),
            self.gamma2.iter().filter(|&&g| g).count(),
        )
    }

    /// `T = (number of ticks) · h`
    pub fn horizon(&self) -> f64 {
        self.len() as f64 * self.h
    }

    /// Column names: `time`, then `x1…`, `xhat1_1…`, `xhat2_1…`, `e1_1…`,
    /// `e2_1…`, `u1_1…`, `u2_1…`, `gamma1`, `gamma2`.
    pub fn csv_header(&self) -> Vec<String> {
        let n = self.x.first().map_or(0, Vec::len);
        let m1 = self.u1.first().map_or(0, Vec::len);
        let m2 = self.u2.first().map_or(0, Vec::len);
        let cols = |name: &'static str, k: usize| (1..=k).map(move |i| format!("{name}{i}"));
        std::iter::once("time".to_string())
            .chain(cols("x", n))
            .chain(cols("xhat1_", n))
            .chain(cols("xhat2_", n))
            .chain(cols("e1_", n))
            .chain(cols("e2_", n))
            .chain(cols("u1_", m1))
            .chain(cols("u2_", m2))
            .chain(["gamma1".to_string(), "gamma2".to_string()])
            .collect()
    }

    /// Writes one row per tick; numbers use the shortest round-trip form.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        for k in 0..self.len() {
            let mut row = vec![csv_number(self.times[k])];
            for series in [
                &self.x,
                &self.xhat1,
                &self.xhat2,
                &self.e1,
                &self.e2,
                &self.u1,
                &self.u2,
            ] {
                row.extend(series[k].iter().copied().map(csv_number));
            }
            row.push(u8::from(self.gamma1[k]).to_string());
            row.push(u8::from(self.gamma2[k]).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    pub scheme: Scheme,
    pub burn_in: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::default(),
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Simulates `horizon` seconds (a multiple of `h`) of the closed loop.
///
/// At each tick the schedulers draw `γ1 ~ Bernoulli(1 − p)` and
/// `γ2 ~ Bernoulli(1 − q)`; a transmission resets that player's estimate to
/// the state. Controls are `u1 = −R1⁻¹B1ᵀP x̂1` and `u2 = R2⁻¹B2ᵀP x̂2`, and
/// the estimates coast with `exp(Ã h)` between ticks.
pub fn simulate_trajectories(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    policy: SchedulingPolicy,
    horizon: f64,
    seed: u64,
    scheme: Scheme,
) -> Result<TrajectoryLog, SimulationError> {
    let ticks = tick_count(horizon, spec.h)?;
    let plant = Plant::new(spec, riccati, policy, scheme)?;
    let mut run = Run::new(&plant, seed, 0);
    let mut log = TrajectoryLog {
        seed,
        h: spec.h,
        times: Vec::with_capacity(ticks),
        x: Vec::with_capacity(ticks),
        xhat1: Vec::with_capacity(ticks),
        xhat2: Vec::with_capacity(ticks),
        e1: Vec::with_capacity(ticks),
        e2: Vec::with_capacity(ticks),
        u1: Vec::with_capacity(ticks),
        u2: Vec::with_capacity(ticks),
        gamma1: Vec::with_capacity(ticks),
        gamma2: Vec::with_capacity(ticks),
    };
    for k in 0..ticks {
        let s = run.tick();
        log.times.push(k as f64 * spec.h);
        log.e1.push(to_vec(&(&s.x - &s.xhat1)));
        log.e2.push(to_vec(&(&s.x - &s.xhat2)));
        log.x.push(to_vec(&s.x));
        log.xhat1.push(to_vec(&s.xhat1));
        log.xhat2.push(to_vec(&s.xhat2));
        log.u1.push(to_vec(&s.u1));
        log.u2.push(to_vec(&s.u2));
        log.gamma1.push(s.gamma1);
        log.gamma2.push(s.gamma2);
    }
    Ok(log)
}

/// Time-averaged running cost and communication counts of a run, per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCosts {
    /// `(1/T) ∫ xᵀQx + u1ᵀR1u1 − u2ᵀR2u2 dt`, left Riemann sum at the ticks.
    pub quadratic: f64,
    pub n1: usize,
    pub n2: usize,
    pub horizon: f64,
    /// `quadratic + (λ11 n1 + λ12 n2) / T`
    pub j1: f64,
    /// `quadratic − (λ21 n1 + λ22 n2) / T`
    pub j2: f64,
}

fn quad_form(v: &[f64], m: &Mat) -> f64 {
    let v = DVector::from_column_slice(v);
    v.dot(&(m * &v))
}

/// Realized per-second costs of a logged run.
pub fn empirical_costs(log: &TrajectoryLog, spec: &GameSpec, lambda: &CommCosts) -> EmpiricalCosts {
    let horizon = log.horizon();
    let running: f64 = (0..log.len())
        .map(|k| quad_form(&log.x[k], &spec.q) + quad_form(&log.u1[k], &spec.r1) - quad_form(&log.u2[k], &spec.r2))
        .sum::<f64>()
        * log.h;
    let (n1, n2) = log.counts();
    cost_totals(running / horizon, n1, n2, horizon, lambda)
}

fn cost_totals(quadratic: f64, n1: usize, n2: usize, horizon: f64, lambda: &CommCosts) -> EmpiricalCosts {
    let (c1, c2) = (n1 as f64 / horizon, n2 as f64 / horizon);
    EmpiricalCosts {
        quadratic,
        n1,
        n2,
        horizon,
        j1: quadratic + lambda.l11() * c1 + lambda.l12() * c2,
        j2: quadratic - lambda.l21() * c1 - lambda.l22() * c2,
    }
}

/// Analytic per-tick costs converted to per-second units: the communication
/// terms are per tick, so they are divided by `h`; the quadratic part is
/// already a rate.
pub fn analytic_per_second(costs: &CostPair, lambda: &CommCosts, policy: SchedulingPolicy, h: f64) -> (f64, f64) {
    let c1 = crate::scheduler::comm_cost_p1(lambda, policy);
    let c2 = crate::scheduler::comm_cost_p2(lambda, policy);
    (costs.j1 + c1 * (1.0 / h - 1.0), costs.j2 + c2 * (1.0 / h - 1.0))
}

/// Ensemble statistics of the stacked post-reset error `[e1; e2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    /// Time- and ensemble-averaged `e eᵀ`.
    pub sigma: Mat,
    /// Standard error of each entry of `sigma` across members.
    pub stderr: Mat,
    /// Mean per-second costs over members.
    pub costs: EmpiricalCosts,
    /// Standard errors of `(j1, j2)` across members.
    pub cost_stderr: (f64, f64),
    /// Realized transmission rates per tick `(n1, n2) / ticks`.
    pub transmit_rate: (f64, f64),
    pub ensemble: usize,
    pub ticks: usize,
    pub burn_in_ticks: usize,
}

struct MemberStats {
    second_moment: Mat,
    quadratic: f64,
    n1: usize,
    n2: usize,
}

fn run_member(plant: &Plant, spec: &GameSpec, seed: u64, member: u64, ticks: usize, burn: usize) -> MemberStats {
    let n = plant.n();
    let mut run = Run::new(plant, seed, member);
    let mut acc = Mat::zeros(2 * n, 2 * n);
    let mut e = DVector::zeros(2 * n);
    let (mut quad, mut n1, mut n2) = (0.0, 0, 0);
    for k in 0..ticks {
        let s = run.tick();
        if k < burn {
            continue;
        }
        e.rows_mut(0, n).copy_from(&(&s.x - &s.xhat1));
        e.rows_mut(n, n).copy_from(&(&s.x - &s.xhat2));
        acc.ger(1.0, &e, &e, 1.0);
        quad += s.x.dot(&(&spec.q * &s.x)) + s.u1.dot(&(&spec.r1 * &s.u1)) - s.u2.dot(&(&spec.r2 * &s.u2));
        n1 += s.gamma1 as usize;
        n2 += s.gamma2 as usize;
    }
    let kept = (ticks - burn) as f64;
    MemberStats {
        second_moment: acc / kept,
        quadratic: quad / kept,
        n1,
        n2,
    }
}

/// Runs `ensemble` independent members of `ticks` ticks each, discarding the
/// first `burn_in · ticks`, and averages the stacked error second moment and
/// the per-second costs. Members run on the rayon pool; member `i` always
/// uses streams `(seed_base, i)`.
pub fn empirical_covariance(
    spec: &GameSpec,
    riccati: &RiccatiSolution,
    policy: SchedulingPolicy,
    ticks: usize,
    ensemble: usize,
    seed_base: u64,
    opts: &SimOptions,
) -> Result<EnsembleStats, SimulationError> {
    if ensemble == 0 || ticks == 0 {
        return Err(SimulationError::Domain("ensemble and ticks must be positive".into()));
    }
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(SimulationError::Domain(format!(
            "burn-in fraction must lie in [0, 1), got {}",
            opts.burn_in
        )));
    }
    let burn = (ticks as f64 * opts.burn_in).floor() as usize;
    let plant = Plant::new(spec, riccati, policy, opts.scheme)?;
    let members: Vec<MemberStats> = (0..ensemble as u64)
        .into_par_iter()
        .map(|m| run_member(&plant, spec, seed_base, m, ticks, burn))
        .collect();

    let m = ensemble as f64;
    let dim = 2 * spec.n();
    let mean = members
        .iter()
        .fold(Mat::zeros(dim, dim), |acc, s| acc + &s.second_moment)
        / m;
    let var = members.iter().fold(Mat::zeros(dim, dim), |acc, s| {
        acc + (&s.second_moment - &mean).map(|d| d * d)
    }) / (m - 1.0).max(1.0);
    let stderr = var.map(|v| (v / m).sqrt());

    let kept = (ticks - burn) as f64;
    let horizon = kept * spec.h;
    let per_member: Vec<EmpiricalCosts> = members
        .iter()
        .map(|s| cost_totals(s.quadratic, s.n1, s.n2, horizon, &spec.lambda))
        .collect();
    let mean_of = |f: fn(&EmpiricalCosts) -> f64| per_member.iter().map(f).sum::<f64>() / m;
    let se_of = |f: fn(&EmpiricalCosts) -> f64, mu: f64| {
        (per_member.iter().map(|c| (f(c) - mu).powi(2)).sum::<f64>() / (m - 1.0).max(1.0) / m).sqrt()
    };
    let (j1, j2) = (mean_of(|c| c.j1), mean_of(|c| c.j2));
    let n1: usize = members.iter().map(|s| s.n1).sum();
    let n2: usize = members.iter().map(|s| s.n2).sum();
    let costs = EmpiricalCosts {
        quadratic: mean_of(|c| c.quadratic),
        n1,
        n2,
        horizon: horizon * m,
        j1,
        j2,
    };
    Ok(EnsembleStats {
        sigma: linalg::sym(&mean),
        stderr,
        cost_stderr: (se_of(|c| c.j1, j1), se_of(|c| c.j2, j2)),
        transmit_rate: (n1 as f64 / (kept * m), n2 as f64 / (kept * m)),
        costs,
        ensemble,
        ticks,
        burn_in_ticks: burn,
    })
}
