use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RcZoneSpec, ThermalError, ZoneInputs};
use crate::autodiff::{softplus_inv, Real};

pub const MLP_WIDTH: usize = 8;
pub const RECURRENT_WIDTH: usize = 32;
/// Sharpness of the smooth hinge used in the sign-violation penalty.
pub const PENALTY_BETA: f64 = 50.0;
/// Output scale of the recurrent baseline, K per unit activation.
const RECURRENT_OUT_K: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// One coefficient per input.
    Affine,
    /// Coefficients from a tanh MLP of width 8.
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Heat-flow decomposition into envelope, solar, internal and HVAC heads.
    /// With `projected`, each head coefficient passes through softplus so the
    /// sign constraints hold by construction.
    Modnn { head: HeadKind, projected: bool },
    /// Unconstrained one-hidden-layer recurrent map (width 32).
    Recurrent,
}

/// Fixed scaling constants, chosen from training data and stored with the
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    /// J/K; `c_inv = exp(θ_c)/c_ref`
    pub c_ref: f64,
    /// W represented by one unit of head output
    pub p_ref: f64,
    /// K; envelope driving difference scale
    pub d_scale: f64,
    pub ghi_scale: f64,
    pub occ_scale: f64,
    pub act_scale: f64,
    pub t_mean: f64,
    pub t_std: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            c_ref: 1e7,
            p_ref: 1000.0,
            d_scale: 10.0,
            ghi_scale: 1000.0,
            occ_scale: 1.0,
            act_scale: 1.0,
            t_mean: 25.0,
            t_std: 5.0,
        }
    }
}

impl Normalization {
    pub const NAMES: [&'static str; 8] = [
        "c_ref",
        "p_ref",
        "d_scale",
        "ghi_scale",
        "occ_scale",
        "act_scale",
        "t_mean",
        "t_std",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.c_ref,
            self.p_ref,
            self.d_scale,
            self.ghi_scale,
            self.occ_scale,
            self.act_scale,
            self.t_mean,
            self.t_std,
        ]
    }

    pub fn set(&mut self, name: &str, v: f64) -> bool {
        let slot = match name {
            "c_ref" => &mut self.c_ref,
            "p_ref" => &mut self.p_ref,
            "d_scale" => &mut self.d_scale,
            "ghi_scale" => &mut self.ghi_scale,
            "occ_scale" => &mut self.occ_scale,
            "act_scale" => &mut self.act_scale,
            "t_mean" => &mut self.t_mean,
            "t_std" => &mut self.t_std,
            _ => return false,
        };
        *slot = v;
        true
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        let v = self.values();
        let scales_ok = v[..6]
            .iter()
            .chain(std::iter::once(&v[7]))
            .all(|x| *x > 0.0 && x.is_finite());
        if scales_ok && self.t_mean.is_finite() {
            Ok(())
        } else {
            Err(ThermalError::InvalidParams(
                "normalization scales must be positive".into(),
            ))
        }
    }
}

fn std_or(xs: impl Iterator<Item = f64> + Clone, fallback: f64) -> (f64, f64) {
    let n = xs.clone().count().max(1) as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (mean, if sd > 1e-9 { sd } else { fallback })
}

impl Normalization {
    /// Scales from a training trace. Head inputs are scaled but not centred
    /// so that zero input still means zero heat flow.
    pub fn from_trace(trace: &super::ThermalTrace) -> Self {
        let temps = trace.t_zone.iter().chain(&trace.t_out).copied();
        let (t_mean, t_std) = std_or(temps, 5.0);
        let diffs = trace.t_out.iter().zip(&trace.t_zone).map(|(o, z)| o - z);
        let (_, d_scale) = std_or(diffs, 10.0);
        let (_, ghi_scale) = std_or(trace.ghi.iter().copied(), 1000.0);
        let (_, occ_scale) = std_or(trace.occupancy.iter().copied(), 1.0);
        let (_, act_scale) = std_or(trace.activity.iter().copied(), 1.0);
        let (_, p_ref) = std_or(trace.q_hvac.iter().copied(), 1000.0);
        Normalization {
            c_ref: 1e7,
            p_ref,
            d_scale,
            ghi_scale,
            occ_scale,
            act_scale,
            t_mean,
            t_std,
        }
    }
}

/// Trainable zone model: kind, scaling constants and the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalModelParams {
    pub kind: ModelKind,
    pub norm: Normalization,
    pub theta: Vec<f64>,
}

/// One evaluated step, with the per-head flows (W) for inspection.
#[derive(Debug, Clone, Copy)]
pub struct StepTerms<R> {
    pub next: R,
    /// Squared sign violations of unprojected heads; zero otherwise.
    pub penalty: R,
    pub q_env: R,
    pub q_solar: R,
    pub q_internal: R,
    pub q_hvac: R,
}

struct MlpShape {
    n_in: usize,
    width: usize,
    n_out: usize,
}

impl MlpShape {
    const fn len(&self) -> usize {
        self.width * self.n_in + self.width + self.n_out * self.width + self.n_out
    }
}

const ENV_MLP: MlpShape = MlpShape {
    n_in: 2,
    width: MLP_WIDTH,
    n_out: 1,
};
const SOL_MLP: MlpShape = MlpShape {
    n_in: 1,
    width: MLP_WIDTH,
    n_out: 1,
};
const INT_MLP: MlpShape = MlpShape {
    n_in: 2,
    width: MLP_WIDTH,
    n_out: 2,
};
const HVAC_MLP: MlpShape = MlpShape {
    n_in: 1,
    width: MLP_WIDTH,
    n_out: 1,
};
const REC_MLP: MlpShape = MlpShape {
    n_in: 6,
    width: RECURRENT_WIDTH,
    n_out: 1,
};

fn mlp<R: Real>(theta: &[R], shape: &MlpShape, z: &[R]) -> Vec<R> {
    let (w1, rest) = theta.split_at(shape.width * shape.n_in);
    let (b1, rest) = rest.split_at(shape.width);
    let (w2, b2) = rest.split_at(shape.n_out * shape.width);
    let hidden: Vec<R> = (0..shape.width)
        .map(|j| R::affine(&w1[j * shape.n_in..(j + 1) * shape.n_in], z, b1[j]).tanh())
        .collect();
    (0..shape.n_out)
        .map(|k| R::affine(&w2[k * shape.width..(k + 1) * shape.width], &hidden, b2[k]))
        .collect()
}

/// Offsets of each head inside `theta` for a Modnn model.
struct ModnnLayout {
    env: std::ops::Range<usize>,
    sol: std::ops::Range<usize>,
    int: std::ops::Range<usize>,
    hvac: std::ops::Range<usize>,
}

fn modnn_layout(head: HeadKind) -> ModnnLayout {
    let sizes = match head {
        HeadKind::Affine => [1, 1, 2, 1],
        HeadKind::Mlp => [ENV_MLP.len(), SOL_MLP.len(), INT_MLP.len(), HVAC_MLP.len()],
    };
    let mut at = 1;
    let mut next = |n: usize| {
        let r = at..at + n;
        at += n;
        r
    };
    ModnnLayout {
        env: next(sizes[0]),
        sol: next(sizes[1]),
        int: next(sizes[2]),
        hvac: next(sizes[3]),
    }
}

impl ModelKind {
    pub fn param_count(&self) -> usize {
        match self {
            ModelKind::Modnn { head, .. } => modnn_layout(*head).hvac.end,
            ModelKind::Recurrent => REC_MLP.len(),
        }
    }
}

impl ThermalModelParams {
    /// Initial parameters: unit head coefficients, nominal capacitance, and
    /// small seeded weights for any MLP layers.
    pub fn init(kind: ModelKind, norm: Normalization, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; kind.param_count()];
        match kind {
            ModelKind::Modnn { head, projected } => {
                let one = if projected { softplus_inv(1.0) } else { 1.0 };
                let lay = modnn_layout(head);
                match head {
                    HeadKind::Affine => {
                        for r in [lay.env, lay.sol, lay.int, lay.hvac] {
                            theta[r].fill(one);
                        }
                    }
                    HeadKind::Mlp => {
                        for (r, shape) in [
                            (lay.env, &ENV_MLP),
                            (lay.sol, &SOL_MLP),
                            (lay.int, &INT_MLP),
                            (lay.hvac, &HVAC_MLP),
                        ] {
                            init_mlp(&mut theta[r], shape, &mut rng, one);
                        }
                    }
                }
            }
            ModelKind::Recurrent => init_mlp(&mut theta, &REC_MLP, &mut rng, 0.0),
        }
        ThermalModelParams { kind, norm, theta }
    }

    /// Affine Modnn whose heads reproduce the RC zone exactly.
    pub fn from_rc(spec: &RcZoneSpec, projected: bool) -> Self {
        let norm = Normalization::default();
        let kind = ModelKind::Modnn {
            head: HeadKind::Affine,
            projected,
        };
        let lay = modnn_layout(HeadKind::Affine);
        let enc = |k: f64| if projected { softplus_inv(k.max(1e-300)) } else { k };
        let mut theta = vec![0.0; kind.param_count()];
        theta[0] = (norm.c_ref / spec.capacitance).ln();
        theta[lay.env.start] = enc(norm.d_scale / (spec.resistance * norm.p_ref));
        theta[lay.sol.start] = enc(spec.solar_aperture * norm.ghi_scale / norm.p_ref);
        theta[lay.int.start] = enc(spec.gain_per_occupant * norm.occ_scale / norm.p_ref);
        theta[lay.int.start + 1] = enc(spec.gain_per_activity * norm.act_scale / norm.p_ref);
        theta[lay.hvac.start] = enc(1.0);
        ThermalModelParams { kind, norm, theta }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        self.norm.validate()?;
        if self.theta.len() != self.kind.param_count() {
            return Err(ThermalError::InvalidParams(format!(
                "expected {} parameters, found {}",
                self.kind.param_count(),
                self.theta.len()
            )));
        }
        if self.theta.iter().any(|x| !x.is_finite()) {
            return Err(ThermalError::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }

    /// True when every head carries a structural sign constraint.
    pub fn is_sign_constrained(&self) -> bool {
        matches!(self.kind, ModelKind::Modnn { projected: true, .. })
    }

    /// Evaluates one step with parameters `theta` (f64 or tape variables).
    pub fn step_terms<R: Real>(&self, theta: &[R], t_zone: R, d: &ZoneInputs, q_hvac: R, dt: f64) -> StepTerms<R> {
        let n = &self.norm;
        let zero = t_zone.lift(0.0);
        match self.kind {
            ModelKind::Recurrent => {
                let z = [
                    (t_zone - n.t_mean) / n.t_std,
                    zero + (d.t_out - n.t_mean) / n.t_std,
                    zero + d.ghi / n.ghi_scale,
                    zero + d.occupancy / n.occ_scale,
                    zero + d.activity / n.act_scale,
                    q_hvac / n.p_ref,
                ];
                let y = mlp(theta, &REC_MLP, &z)[0];
                StepTerms {
                    next: t_zone + y * RECURRENT_OUT_K,
                    penalty: zero,
                    q_env: zero,
                    q_solar: zero,
                    q_internal: zero,
                    q_hvac: zero,
                }
            }
            ModelKind::Modnn { head, projected } => {
                let lay = modnn_layout(head);
                let u_env = (zero + d.t_out - t_zone) / n.d_scale;
                let u_sol = zero + d.ghi / n.ghi_scale;
                let u_occ = zero + d.occupancy / n.occ_scale;
                let u_act = zero + d.activity / n.act_scale;
                let u_q = q_hvac / n.p_ref;
                // raw (pre-projection) coefficients: env, sol, occ, act, hvac
                let raw: [R; 5] = match head {
                    HeadKind::Affine => [
                        theta[lay.env.start],
                        theta[lay.sol.start],
                        theta[lay.int.start],
                        theta[lay.int.start + 1],
                        theta[lay.hvac.start],
                    ],
                    HeadKind::Mlp => {
                        let tz_n = (t_zone - n.t_mean) / n.t_std;
                        let to_n = zero + (d.t_out - n.t_mean) / n.t_std;
                        let env = mlp(&theta[lay.env.clone()], &ENV_MLP, &[to_n, tz_n])[0];
                        let sol = mlp(&theta[lay.sol.clone()], &SOL_MLP, &[u_sol])[0];
                        let int = mlp(&theta[lay.int.clone()], &INT_MLP, &[u_occ, u_act]);
                        let hv = mlp(&theta[lay.hvac.clone()], &HVAC_MLP, &[tz_n])[0];
                        [env, sol, int[0], int[1], hv]
                    }
                };
                let inputs = [u_env, u_sol, u_occ, u_act, u_q];
                let mut penalty = zero;
                let k: [R; 5] = if projected {
                    raw.map(|r| r.softplus())
                } else {
                    for (r, u) in raw.iter().zip(&inputs) {
                        let v = (-*r).max0_smooth(PENALTY_BETA) * *u;
                        penalty = penalty + v * v;
                    }
                    raw
                };
                let h_env = k[0] * u_env;
                let h_sol = k[1] * u_sol;
                let h_int = k[2] * u_occ + k[3] * u_act;
                let h_hvac = k[4] * u_q;
                let factor = theta[0].exp() * (dt * n.p_ref / n.c_ref);
                let next = t_zone + factor * (h_env + h_sol + h_int + h_hvac);
                StepTerms {
                    next,
                    penalty,
                    q_env: h_env * n.p_ref,
                    q_solar: h_sol * n.p_ref,
                    q_internal: h_int * n.p_ref,
                    q_hvac: h_hvac * n.p_ref,
                }
            }
        }
    }

    /// Capacitance inverse `c_inv` in 1/(J/K), Modnn models only.
    pub fn c_inv(&self) -> Option<f64> {
        matches!(self.kind, ModelKind::Modnn { .. }).then(|| self.theta[0].exp() / self.norm.c_ref)
    }
}

fn init_mlp(theta: &mut [f64], shape: &MlpShape, rng: &mut ChaCha8Rng, out_bias: f64) {
    let a1 = 1.0 / (shape.n_in as f64).sqrt();
    let a2 = 0.1 / (shape.width as f64).sqrt();
    let n_w1 = shape.width * shape.n_in;
    let n_b1 = shape.width;
    let n_w2 = shape.n_out * shape.width;
    for (i, t) in theta.iter_mut().enumerate() {
        *t = if i < n_w1 {
            rng.random_range(-a1..a1)
        } else if i < n_w1 + n_b1 {
            rng.random_range(-0.1..0.1)
        } else if i < n_w1 + n_b1 + n_w2 {
            rng.random_range(-a2..a2)
        } else {
            out_bias
        };
    }
}

/// `T_z' = T_z + dt·c_inv·(q_env + q_solar + q_internal + q_hvac)`.
pub fn modnn_step(
    params: &ThermalModelParams,
    t_zone: f64,
    d: &ZoneInputs,
    q_hvac: f64,
    dt: f64,
) -> Result<f64, ThermalError> {
    params.validate()?;
    let next = params.step_terms(&params.theta, t_zone, d, q_hvac, dt).next;
    if next.is_finite() {
        Ok(next)
    } else {
        Err(ThermalError::InvalidParams("non-finite prediction".into()))
    }
}

/// Iterated prediction of length `H + 1`, starting with `t0`.
pub fn rollout_predict(
    params: &ThermalModelParams,
    t0: f64,
    inputs: &[ZoneInputs],
    q_hvac: &[f64],
    dt: f64,
) -> Result<Vec<f64>, ThermalError> {
    if inputs.len() != q_hvac.len() {
        return Err(ThermalError::LengthMismatch {
            disturbances: inputs.len(),
            actions: q_hvac.len(),
        });
    }
    params.validate()?;
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(t0);
    let mut t = t0;
    for (d, q) in inputs.iter().zip(q_hvac) {
        t = params.step_terms(&params.theta, t, d, *q, dt).next;
        out.push(t);
    }
    Ok(out)
}

/// Up to three zones, each with its own model, plus fixed conductances
/// (W/K) between zone pairs.
#[derive(Debug, Clone)]
pub struct MultiZoneModel {
    pub zones: Vec<ThermalModelParams>,
    pub couplings: Vec<(usize, usize, f64)>,
}

impl MultiZoneModel {
    pub const MAX_ZONES: usize = 3;

    pub fn new(zones: Vec<ThermalModelParams>, couplings: Vec<(usize, usize, f64)>) -> Result<Self, ThermalError> {
        if zones.is_empty() || zones.len() > Self::MAX_ZONES {
            return Err(ThermalError::InvalidSpec(format!(
                "between 1 and {} zones supported, got {}",
                Self::MAX_ZONES,
                zones.len()
            )));
        }
        for &(i, j, ua) in &couplings {
            if i >= zones.len() || j >= zones.len() || i == j || !(ua >= 0.0) {
                return Err(ThermalError::InvalidSpec(format!("bad coupling ({i}, {j}, {ua})")));
            }
        }
        for z in &zones {
            if z.c_inv().is_none() {
                return Err(ThermalError::InvalidSpec(
                    "multi-zone coupling needs Modnn zones".into(),
                ));
            }
        }
        Ok(MultiZoneModel { zones, couplings })
    }

    /// Advances all zones; conduction uses start-of-step temperatures.
    pub fn step(&self, temps: &[f64], inputs: &[ZoneInputs], q_hvac: &[f64], dt: f64) -> Vec<f64> {
        let mut next: Vec<f64> = self
            .zones
            .iter()
            .enumerate()
            .map(|(i, p)| p.step_terms(&p.theta, temps[i], &inputs[i], q_hvac[i], dt).next)
            .collect();
        for &(i, j, ua) in &self.couplings {
            let q = ua * (temps[j] - temps[i]);
            next[i] += dt * self.zones[i].c_inv().unwrap() * q;
            next[j] -= dt * self.zones[j].c_inv().unwrap() * q;
        }
        next
    }
}
