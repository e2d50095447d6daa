//! Expectation–maximization for the mixture dictionary.
//!
//! Every M-step adds a Tikhonov ridge `λ I`, `λ = scale · tr(R_c)/n`, and
//! components whose prior falls below the pruning threshold are replaced by a
//! split of the largest component. Reductions run over fixed chunks in a fixed
//! order, so a fit is bit-reproducible for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{log_sum_exp, LabeledSamples, MixtureDictionary};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Cholesky, SymMatrix};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    pub loglik_rel_tol: f64,
    pub tikhonov_scale: f64,
    pub prune_prior_threshold: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            loglik_rel_tol: 1e-6,
            tikhonov_scale: 1e-4,
            prune_prior_threshold: 1e-4,
            seed: 0,
            restarts: 3,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.loglik_rel_tol > 0.0 && self.tikhonov_scale > 0.0 && self.prune_prior_threshold > 0.0) {
            return Err(Error::Domain("EM tolerances must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Domain("EM needs at least one restart".into()));
        }
        Ok(())
    }
}

/// Average log-likelihood history of one EM run.
///
/// `phase_starts` marks the trace positions where a pruning split changed
/// the model structure; the likelihood is non-decreasing within each phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    pub loglik: Vec<f64>,
    pub phase_starts: Vec<usize>,
    pub splits: usize,
    pub converged: bool,
}

impl EmTrace {
    /// Iterates over maximal runs of the trace without a structural change.
    pub fn phases(&self) -> impl Iterator<Item = &[f64]> {
        let mut bounds = vec![0];
        bounds.extend(self.phase_starts.iter().copied());
        bounds.push(self.loglik.len());
        bounds
            .windows(2)
            .map(|w| &self.loglik[w[0]..w[1]])
            .collect::<Vec<_>>()
            .into_iter()
    }

    pub fn final_loglik(&self) -> f64 {
        self.loglik.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub dictionary: MixtureDictionary,
    pub trace: EmTrace,
    pub restart: usize,
}

#[derive(Clone)]
struct Params {
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<SymMatrix>,
}

struct Estep {
    avg_loglik: f64,
    resp: Vec<f64>,
    mass: Vec<f64>,
    weighted_sum: Vec<Vec<f64>>,
}

/// Fits a `k`-component mixture, keeping the best of `cfg.restarts` runs.
pub fn fit_em(samples: &LabeledSamples, k: usize, cfg: &EmConfig) -> Result<MixtureDictionary> {
    Ok(fit_em_traced(samples, k, cfg)?.dictionary)
}

pub fn fit_em_traced(samples: &LabeledSamples, k: usize, cfg: &EmConfig) -> Result<EmFit> {
    cfg.validate()?;
    check_samples(samples, k)?;
    let n = samples.n();
    let (_, global_cov) = samples.mean_and_covariance();
    let mut best: Option<EmFit> = None;
    for restart in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        let means = kmeans_pp_seeds(samples, k, &mut rng);
        let mut cov = global_cov.clone();
        cov.add_diagonal(cfg.tikhonov_scale * cov.trace() / n as f64);
        let init = Params {
            priors: vec![1.0 / k as f64; k],
            means,
            covs: vec![cov; k],
        };
        let (params, trace) = run(samples, init, cfg)?;
        let better = best
            .as_ref()
            .is_none_or(|b| trace.final_loglik() > b.trace.final_loglik());
        if better {
            best = Some(EmFit {
                dictionary: finish(params)?,
                trace,
                restart,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Runs EM from an explicit initial dictionary (single run, no restarts).
pub fn run_em_from(samples: &LabeledSamples, init: &MixtureDictionary, cfg: &EmConfig) -> Result<EmFit> {
    cfg.validate()?;
    check_samples(samples, init.k())?;
    if samples.n() != init.n() {
        return Err(Error::DimensionMismatch {
            expected: init.n(),
            found: samples.n(),
        });
    }
    let params = Params {
        priors: init.priors().to_vec(),
        means: init.means().to_vec(),
        covs: init.covariances().to_vec(),
    };
    let (params, trace) = run(samples, params, cfg)?;
    Ok(EmFit {
        dictionary: finish(params)?,
        trace,
        restart: 0,
    })
}

/// Average per-sample log-likelihood of `samples` under `dict`.
pub fn average_log_likelihood(dict: &MixtureDictionary, samples: &LabeledSamples) -> f64 {
    let partial = par::map_chunks(samples.as_slice(), par::REDUCE_CHUNK * samples.n(), |_, chunk| {
        chunk.chunks_exact(samples.n()).map(|x| dict.log_density(x)).sum::<f64>()
    });
    partial.iter().sum::<f64>() / samples.len() as f64
}

fn check_samples(samples: &LabeledSamples, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("component count must be at least 1".into()));
    }
    if samples.len() < k {
        return Err(Error::InsufficientData {
            samples: samples.len(),
            components: k,
        });
    }
    if samples.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training samples"));
    }
    Ok(())
}

fn finish(p: Params) -> Result<MixtureDictionary> {
    MixtureDictionary::new(p.priors, p.means, p.covs)
}

fn kmeans_pp_seeds(samples: &LabeledSamples, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = samples.len();
    let first = rng.random_range(0..m);
    let mut centers = vec![samples.row(first).to_vec()];
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut d2: Vec<f64> = samples.rows().map(|x| sq(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = m - 1;
            for (t, &w) in d2.iter().enumerate() {
                acc += w;
                if u < acc {
                    idx = t;
                    break;
                }
            }
            idx
        } else {
            rng.random_range(0..m)
        };
        let c = samples.row(pick).to_vec();
        for (t, x) in samples.rows().enumerate() {
            d2[t] = d2[t].min(sq(x, &c));
        }
        centers.push(c);
    }
    centers
}

fn estep(samples: &LabeledSamples, p: &Params) -> Result<Estep> {
    let k = p.priors.len();
    let n = samples.n();
    let chol = p.covs.iter().map(Cholesky::new).collect::<Result<Vec<_>>>()?;
    let norm: Vec<f64> = p
        .priors
        .iter()
        .zip(&chol)
        .map(|(pi, l)| pi.ln() - 0.5 * l.log_det() - 0.5 * n as f64 * super::LN_2PI)
        .collect();

    struct Partial {
        loglik: f64,
        resp: Vec<f64>,
        mass: Vec<f64>,
        sum: Vec<f64>,
    }
    let parts = par::map_chunks(samples.as_slice(), par::REDUCE_CHUNK * n, |_, chunk| {
        let rows = chunk.len() / n;
        let mut out = Partial {
            loglik: 0.0,
            resp: Vec::with_capacity(rows * k),
            mass: vec![0.0; k],
            sum: vec![0.0; k * n],
        };
        let mut l = vec![0.0; k];
        let mut d = vec![0.0; n];
        for x in chunk.chunks_exact(n) {
            for c in 0..k {
                for ((di, xi), mi) in d.iter_mut().zip(x).zip(&p.means[c]) {
                    *di = xi - mi;
                }
                l[c] = norm[c] - 0.5 * chol[c].quad_form(&d);
            }
            let lse = log_sum_exp(&l);
            out.loglik += lse;
            for c in 0..k {
                let r = (l[c] - lse).exp();
                out.resp.push(r);
                out.mass[c] += r;
                for (s, xi) in out.sum[c * n..(c + 1) * n].iter_mut().zip(x) {
                    *s += r * xi;
                }
            }
        }
        out
    });

    let mut loglik = 0.0;
    let mut resp = Vec::with_capacity(samples.len() * k);
    let mut mass = vec![0.0; k];
    let mut sum = vec![0.0; k * n];
    for part in parts {
        loglik += part.loglik;
        resp.extend(part.resp);
        mass.iter_mut().zip(&part.mass).for_each(|(a, b)| *a += b);
        sum.iter_mut().zip(&part.sum).for_each(|(a, b)| *a += b);
    }
    if !loglik.is_finite() {
        return Err(Error::NonFinite("EM log-likelihood"));
    }
    Ok(Estep {
        avg_loglik: loglik / samples.len() as f64,
        resp,
        mass,
        weighted_sum: sum.chunks(n).map(<[f64]>::to_vec).collect(),
    })
}

fn mstep(samples: &LabeledSamples, prev: &Params, e: &Estep, cfg: &EmConfig) -> Params {
    let k = prev.priors.len();
    let n = samples.n();
    let m = samples.len() as f64;
    let tiny = f64::EPSILON * m;
    let means: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            if e.mass[c] > tiny {
                e.weighted_sum[c].iter().map(|s| s / e.mass[c]).collect()
            } else {
                prev.means[c].clone()
            }
        })
        .collect();
    let covs = par::map_indexed(k, |c| {
        if e.mass[c] <= tiny {
            return prev.covs[c].clone();
        }
        let mut acc = vec![0.0; n * (n + 1) / 2];
        let mut d = vec![0.0; n];
        for (t, x) in samples.rows().enumerate() {
            let r = e.resp[t * k + c];
            if r == 0.0 {
                continue;
            }
            for ((di, xi), mi) in d.iter_mut().zip(x).zip(&means[c]) {
                *di = xi - mi;
            }
            let mut idx = 0;
            for i in 0..n {
                let wi = r * d[i];
                for j in 0..=i {
                    acc[idx] += wi * d[j];
                    idx += 1;
                }
            }
        }
        acc.iter_mut().for_each(|v| *v /= e.mass[c]);
        let mut cov = SymMatrix::from_lower(n, &acc).expect("finite weighted moments");
        cov.add_diagonal(cfg.tikhonov_scale * cov.trace() / n as f64);
        cov
    });
    Params {
        priors: e.mass.iter().map(|w| w / m).collect(),
        means,
        covs,
    }
}

/// Replaces every component whose prior is below the threshold by a split of
/// the current largest component. Returns the number of splits performed.
fn prune_and_split(p: &mut Params, threshold: f64) -> Result<usize> {
    let mut splits = 0;
    while let Some(weak) = p.priors.iter().position(|&w| w < threshold) {
        let largest = super::argmax(&p.priors);
        if largest == weak {
            break;
        }
        let eig = sym_eig(&p.covs[largest])?;
        let step = 0.1 * eig.eigvals[0].max(0.0).sqrt();
        let top = eig.column(0);
        p.means[weak] = p.means[largest].iter().zip(&top).map(|(m, u)| m + step * u).collect();
        p.covs[weak] = p.covs[largest].clone();
        let half = 0.5 * p.priors[largest];
        p.priors[largest] = half;
        p.priors[weak] = half;
        let total: f64 = p.priors.iter().sum();
        p.priors.iter_mut().for_each(|w| *w /= total);
        splits += 1;
    }
    Ok(splits)
}

fn run(samples: &LabeledSamples, init: Params, cfg: &EmConfig) -> Result<(Params, EmTrace)> {
    let mut trace = EmTrace::default();
    let mut params = init;
    let mut prev: Option<(Params, f64)> = None;
    for iter in 0..=cfg.max_iters {
        let e = estep(samples, &params)?;
        let ll = e.avg_loglik;
        if let Some((prev_params, prev_ll)) = prev.take() {
            if ll < prev_ll {
                // The ridge term can cost more than the EM step gained once
                // the fit has converged; keep the better parameters.
                params = prev_params;
                trace.converged = true;
                break;
            }
            trace.loglik.push(ll);
            if ll - prev_ll <= cfg.loglik_rel_tol * prev_ll.abs() {
                trace.converged = true;
                break;
            }
        } else {
            trace.loglik.push(ll);
        }
        if iter == cfg.max_iters {
            break;
        }
        let mut next = mstep(samples, &params, &e, cfg);
        let splits = prune_and_split(&mut next, cfg.prune_prior_threshold)?;
        if splits > 0 {
            trace.splits += splits;
            trace.phase_starts.push(trace.loglik.len());
        } else {
            prev = Some((params, ll));
        }
        params = next;
    }
    Ok((params, trace))
}
