//! Random instances and hand-rolled reference computations shared by the
//! integration tests. Nothing here calls into the library's filtering code;
//! the oracles redo the algebra from scratch on plain arrays.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{dmatrix, dvector, DMatrix, DVector, Vector2};
use possibility_lmb::filter::{SensorModel, UpdateConfig};
use possibility_lmb::labeled::{BernoulliTrack, DeltaGlmb, GlmbHypothesis, Label, LmbDensity};
use possibility_lmb::network::SensorGraph;
use possibility_lmb::possibility::{GaussianComponent, MaxMixture};
use rand::Rng;

pub struct Instance {
    pub density: LmbDensity,
    pub z: Vec<DVector<f64>>,
    pub sensor: SensorModel,
}

fn random_cov<R: Rng>(rng: &mut R) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(4, 4);
    for k in 0..2 {
        let pv: f64 = rng.gen_range(4.0..30.0);
        let vv = rng.gen_range(1.0..5.0);
        let rho = rng.gen_range(-0.5..0.5);
        c[(k, k)] = pv;
        c[(k + 2, k + 2)] = vv;
        c[(k, k + 2)] = rho * (pv * vv).sqrt();
        c[(k + 2, k)] = c[(k, k + 2)];
    }
    c
}

/// A small random single-sensor update problem: up to three tracks near
/// the origin, up to three measurements around them, and a sensor far
/// enough away that detection failure stays well away from zero.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let n = rng.gen_range(1..=3);
    let mut tracks = Vec::new();
    for i in 0..n {
        let comps = (0..rng.gen_range(1..=2))
            .map(|c| {
                let w = if c == 0 { 1.0 } else { rng.gen_range(0.2..1.0) };
                let mean = DVector::from_vec(vec![
                    rng.gen_range(-30.0..30.0),
                    rng.gen_range(-30.0..30.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                ]);
                GaussianComponent::new(w, mean, random_cov(rng)).unwrap()
            })
            .collect();
        let other = rng.gen_range(0.1..1.0);
        let (tau, gamma) = if rng.gen_bool(0.5) { (1.0, other) } else { (other, 1.0) };
        tracks.push(BernoulliTrack::new(Label::new(1, i), tau, gamma, MaxMixture::new(comps).unwrap()).unwrap());
    }
    let density = LmbDensity::from_tracks(tracks).unwrap();
    let m = rng.gen_range(0..=3);
    let z = (0..m)
        .map(|_| DVector::from_vec(vec![rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0)]))
        .collect();
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let position = Vector2::new(150.0 * angle.cos(), 150.0 * angle.sin());
    let sensor = SensorModel::position_sensor(0, position, rng.gen_range(3.0..8.0), 120.0, rng.gen_range(0.5..5.0));
    Instance { density, z, sensor }
}

/// Plain-array view of one track for the reference computation.
pub struct PlainTrack {
    pub tau: f64,
    pub gamma: f64,
    /// (weight, mean, 4x4 covariance row-major)
    pub comps: Vec<(f64, [f64; 4], [[f64; 4]; 4])>,
}

pub fn plain(d: &LmbDensity) -> Vec<PlainTrack> {
    d.tracks()
        .map(|t| PlainTrack {
            tau: t.tau(),
            gamma: t.gamma(),
            comps: t
                .f()
                .components()
                .iter()
                .map(|c| {
                    let mut mean = [0.0; 4];
                    let mut cov = [[0.0; 4]; 4];
                    for i in 0..4 {
                        mean[i] = c.mean()[i];
                        for j in 0..4 {
                            cov[i][j] = c.cov()[(i, j)];
                        }
                    }
                    (c.weight(), mean, cov)
                })
                .collect(),
        })
        .collect()
}

pub struct PlainSensor {
    pub pos: [f64; 2],
    pub r: [[f64; 2]; 2],
    pub sigma_s: f64,
    pub lambda: f64,
    pub volume: f64,
}

pub fn plain_sensor(s: &SensorModel) -> PlainSensor {
    PlainSensor {
        pos: [s.position.x, s.position.y],
        r: [[s.r[(0, 0)], s.r[(0, 1)]], [s.r[(1, 0)], s.r[(1, 1)]]],
        sigma_s: s.sigma_s,
        lambda: s.clutter_rate,
        volume: s.clutter_volume,
    }
}

fn shape(p: [f64; 2], s: &PlainSensor) -> f64 {
    let dx = p[0] - s.pos[0];
    let dy = p[1] - s.pos[1];
    (-0.5 * (dx * dx + dy * dy) / (s.sigma_s * s.sigma_s)).exp()
}

/// Likelihood ratio of a miss: best component weight times the detection
/// failure at its mean.
pub fn miss_ratio(t: &PlainTrack, s: &PlainSensor) -> f64 {
    t.comps
        .iter()
        .map(|(w, m, _)| w * (1.0 - shape([m[0], m[1]], s)))
        .fold(0.0, f64::max)
}

/// Likelihood ratio of a detection: best component weight times the
/// innovation possibility, over the clutter possibility of `z`.
pub fn detection_ratio(t: &PlainTrack, z: [f64; 2], s: &PlainSensor) -> f64 {
    let det_r = s.r[0][0] * s.r[1][1] - s.r[0][1] * s.r[1][0];
    let kappa = 2.0 * std::f64::consts::PI * det_r.sqrt() * s.lambda / s.volume * shape(z, s);
    let best = t
        .comps
        .iter()
        .map(|(w, m, p)| {
            let a = p[0][0] + s.r[0][0];
            let b = p[0][1] + s.r[0][1];
            let c = p[1][0] + s.r[1][0];
            let d = p[1][1] + s.r[1][1];
            let det = a * d - b * c;
            let (vx, vy) = (z[0] - m[0], z[1] - m[1]);
            let q = (d * vx * vx - (b + c) * vx * vy + a * vy * vy) / det;
            w * (-0.5 * q).exp()
        })
        .fold(0.0, f64::max);
    best / kappa
}

/// Exhaustive posterior existence pair per track: every label subset and
/// every injective measurement map, scored by the max-product of the prior
/// subset weight and the per-track likelihood ratios.
pub fn brute_force_existence(tracks: &[PlainTrack], z: &[[f64; 2]], s: &PlainSensor) -> Vec<(f64, f64)> {
    let n = tracks.len();
    let m = z.len();
    let ratios: Vec<Vec<f64>> = tracks
        .iter()
        .map(|t| {
            let mut r = vec![miss_ratio(t, s)];
            r.extend(z.iter().map(|&zj| detection_ratio(t, zj, s)));
            r
        })
        .collect();
    let mut tau = vec![0.0f64; n];
    let mut gamma = vec![0.0f64; n];
    let mut top = 0.0f64;
    // choice per track: None = absent, Some(0) = miss, Some(j) = measurement j
    fn rec(
        i: usize,
        choice: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        ctx: &(&[PlainTrack], &[Vec<f64>], usize),
        out: &mut dyn FnMut(&[Option<usize>], f64),
    ) {
        let (tracks, ratios, m) = *ctx;
        if i == tracks.len() {
            let mut w = 1.0;
            for (k, c) in choice.iter().enumerate() {
                w *= match c {
                    None => tracks[k].tau,
                    Some(j) => tracks[k].gamma * ratios[k][*j],
                };
            }
            out(choice, w);
            return;
        }
        for opt in 0..=m + 1 {
            let c = match opt {
                0 => None,
                1 => Some(0),
                j => {
                    if used[j - 2] {
                        continue;
                    }
                    Some(j - 1)
                }
            };
            if let Some(j) = c {
                if j > 0 {
                    used[j - 1] = true;
                }
            }
            choice.push(c);
            rec(i + 1, choice, used, ctx, out);
            choice.pop();
            if let Some(j) = c {
                if j > 0 {
                    used[j - 1] = false;
                }
            }
        }
    }
    let ctx = (tracks, &ratios[..], m);
    rec(0, &mut Vec::new(), &mut vec![false; m], &ctx, &mut |choice, w| {
        top = top.max(w);
        for (k, c) in choice.iter().enumerate() {
            match c {
                None => tau[k] = tau[k].max(w),
                Some(_) => gamma[k] = gamma[k].max(w),
            }
        }
    });
    tau.iter()
        .zip(&gamma)
        .map(|(t, g)| ((t / top).max(1e-9), (g / top).max(1e-9)))
        .collect()
}

pub fn points(z: &[DVector<f64>]) -> Vec<[f64; 2]> {
    z.iter().map(|v| [v[0], v[1]]).collect()
}

/// Update settings that never truncate: every hypothesis kept, no gating.
pub fn exhaustive() -> UpdateConfig {
    UpdateConfig {
        max_hypotheses: 1_000_000,
        gate: 0.0,
        ..UpdateConfig::default()
    }
}

/// Largest existence-pair difference between `a` and reference pairs.
pub fn max_gap(a: &LmbDensity, b: &[(f64, f64)]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.tracks()
        .zip(b)
        .map(|(t, (tau, gamma))| (t.tau() - tau).abs().max((t.gamma() - gamma).abs()))
        .fold(0.0, f64::max)
}

pub fn birth_track<R: Rng>(rng: &mut R, k: u32) -> LmbDensity {
    let mean = DVector::from_vec(vec![rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), 0.0, 0.0]);
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 100.0, 25.0, 25.0]));
    let f = MaxMixture::single(GaussianComponent::new(1.0, mean, cov).unwrap());
    LmbDensity::from_tracks([BernoulliTrack::new(Label::new(k, 0), 1.0, rng.gen_range(0.05..0.5), f).unwrap()]).unwrap()
}

pub fn random_connected_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> SensorGraph {
    let n = rng.gen_range(1..=max_nodes);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..rng.gen_range(0..=n) {
        edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    SensorGraph::new(n, edges).unwrap()
}

pub fn mixture_1d<R: Rng>(rng: &mut R) -> MaxMixture {
    MaxMixture::new(
        (0..rng.gen_range(1..=4))
            .map(|c| {
                let w = if c == 0 { 1.0 } else { rng.gen_range(0.05..1.0) };
                GaussianComponent::new(w, dvector![rng.gen_range(-5.0..5.0)], dmatrix![rng.gen_range(0.2..3.0)]).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

/// Up to three labels and three hypotheses over a one-dimensional state.
pub fn random_glmb<R: Rng>(rng: &mut R) -> DeltaGlmb {
    let labels: Vec<Label> = (0..rng.gen_range(1..=3)).map(|i| Label::new(1, i)).collect();
    let hypotheses = (0..rng.gen_range(1..=3))
        .map(|h| {
            let mut per_label_f = BTreeMap::new();
            let mut assoc = BTreeMap::new();
            for l in &labels {
                if rng.gen_bool(0.6) {
                    per_label_f.insert(*l, Arc::new(mixture_1d(rng)));
                    assoc.insert(*l, 0);
                }
            }
            GlmbHypothesis {
                weight: if h == 0 { 1.0 } else { rng.gen_range(0.01..1.0) },
                assoc,
                per_label_f,
            }
        })
        .collect();
    DeltaGlmb::new(hypotheses)
}

/// `max_h w_h max_{l in h} f_{h,l}(x)` evaluated directly.
pub fn glmb_presence(g: &DeltaGlmb, x: f64) -> f64 {
    let top = g.hypotheses.iter().map(|h| h.weight).fold(0.0, f64::max);
    let mut best = 0.0f64;
    for h in &g.hypotheses {
        for f in h.per_label_f.values() {
            for c in f.components() {
                let v = c.weight() * (-0.5 * (x - c.mean()[0]).powi(2) / c.cov()[(0, 0)]).exp();
                best = best.max(h.weight / top * v);
            }
        }
    }
    best
}

/// (weight, mean, covariance) in one or two dimensions.
pub type Comp = (f64, Vec<f64>, Vec<Vec<f64>>);

pub fn random_comps<R: Rng>(rng: &mut R, d: usize) -> Vec<Comp> {
    (0..rng.gen_range(1..=3))
        .map(|c| {
            let w = if c == 0 { 1.0 } else { rng.gen_range(0.1..1.0) };
            let mean: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let cov = if d == 1 {
                vec![vec![rng.gen_range(0.3..2.0)]]
            } else {
                let (a, b): (f64, f64) = (rng.gen_range(0.3..2.0), rng.gen_range(0.3..2.0));
                let rho = rng.gen_range(-0.6..0.6) * (a * b).sqrt();
                vec![vec![a, rho], vec![rho, b]]
            };
            (w, mean, cov)
        })
        .collect()
}

pub fn to_mixture(comps: &[Comp]) -> MaxMixture {
    let d = comps[0].1.len();
    MaxMixture::new(
        comps
            .iter()
            .map(|(w, m, c)| {
                GaussianComponent::new(*w, DVector::from_column_slice(m), DMatrix::from_fn(d, d, |i, j| c[i][j])).unwrap()
            })
            .collect(),
    )
    .unwrap()
}

/// Direct evaluation of a max-mixture with closed-form 1x1 or 2x2 inverses.
pub fn eval_comps(comps: &[Comp], x: &[f64]) -> f64 {
    comps
        .iter()
        .map(|(w, m, c)| {
            let q = if x.len() == 1 {
                (x[0] - m[0]).powi(2) / c[0][0]
            } else {
                let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
                let (u, v) = (x[0] - m[0], x[1] - m[1]);
                (c[1][1] * u * u - 2.0 * c[0][1] * u * v + c[0][0] * v * v) / det
            };
            w * (-0.5 * q).exp()
        })
        .fold(0.0, f64::max)
}

/// Supremum of `g` by a coarse grid over `[lo, hi]^d` refined ten times
/// around the best node.
pub fn grid_sup(g: &dyn Fn(&[f64]) -> f64, d: usize, lo: f64, hi: f64) -> f64 {
    let n = if d == 1 { 4001 } else { 301 };
    let mut centre = vec![0.5 * (lo + hi); d];
    let mut half = 0.5 * (hi - lo);
    let mut best = 0.0f64;
    for _ in 0..10 {
        let step = 2.0 * half / (n - 1) as f64;
        let mut arg = centre.clone();
        let mut x = vec![0.0; d];
        let total = if d == 1 { n } else { n * n };
        for idx in 0..total {
            x[0] = centre[0] - half + (idx % n) as f64 * step;
            if d == 2 {
                x[1] = centre[1] - half + (idx / n) as f64 * step;
            }
            let v = g(&x);
            if v > best {
                best = v;
                arg.clone_from(&x);
            }
        }
        centre = arg;
        half = 4.0 * step;
    }
    best
}

pub fn track_of(comps: &[Comp], tau: f64, gamma: f64) -> BernoulliTrack {
    BernoulliTrack::new(Label::new(0, 0), tau, gamma, to_mixture(comps)).unwrap()
}
