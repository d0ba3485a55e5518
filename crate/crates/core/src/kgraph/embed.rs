//! Triple scoring models.
//!
//! Parameter layouts (per row):
//!
//! | method | entity row          | relation row        |
//! |--------|---------------------|---------------------|
//! | RotatE | `[re; d] ++ [im; d]` | `[phase; d]`        |
//! | HAKE   | `[mod; d] ++ [phase; d]` | `[mod; d] ++ [phase; d]` |
//! | ModE   | `[mod; d]`          | `[mod; d]`          |
//!
//! Scores (higher is more plausible):
//!
//! - RotatE: `−‖h ∘ e^{iθ} − t‖₂` over complex coordinates.
//! - ModE: `−‖h ∘ r − t‖₂`.
//! - HAKE: `−‖h_m ∘ r_m − t_m‖₂ − λ‖sin((h_p + r_p − t_p)/2)‖₁`.

use super::{KgError, Result, Triple};
use crate::rng::seeded;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KgMethod {
    #[serde(rename = "rotate")]
    RotatE,
    #[serde(rename = "hake")]
    Hake,
    #[serde(rename = "mode")]
    ModE,
}

impl KgMethod {
    pub const ALL: [KgMethod; 3] = [KgMethod::RotatE, KgMethod::Hake, KgMethod::ModE];
}

impl fmt::Display for KgMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KgMethod::RotatE => "rotate",
            KgMethod::Hake => "hake",
            KgMethod::ModE => "mode",
        })
    }
}

impl FromStr for KgMethod {
    type Err = KgError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rotate" | "rotate_e" => Ok(KgMethod::RotatE),
            "hake" => Ok(KgMethod::Hake),
            "mode" | "mod_e" => Ok(KgMethod::ModE),
            other => Err(KgError::BadConfig(format!(
                "unknown embedding method {other:?}"
            ))),
        }
    }
}

/// Smallest modulus a ModE entity coordinate is projected to after an update.
const MIN_MODULUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgEmbedding {
    pub method: KgMethod,
    pub dim: usize,
    pub n_entities: usize,
    pub n_relations: usize,
    pub entities: Vec<f64>,
    pub relations: Vec<f64>,
    /// Weight of the HAKE phase term; unused by the other methods.
    pub hake_lambda: f64,
    pub seed: u64,
    pub epoch: usize,
    pub trained: bool,
}

/// Gradients of a single triple score with respect to the rows it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGrad {
    pub head: Vec<f64>,
    pub relation: Vec<f64>,
    pub tail: Vec<f64>,
}

/// Wraps an angle into `[−π, π)`.
pub(crate) fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = x - two_pi * ((x + PI) / two_pi).floor();
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

impl KgEmbedding {
    pub fn entity_width(method: KgMethod, dim: usize) -> usize {
        match method {
            KgMethod::RotatE | KgMethod::Hake => 2 * dim,
            KgMethod::ModE => dim,
        }
    }

    pub fn relation_width(method: KgMethod, dim: usize) -> usize {
        match method {
            KgMethod::RotatE | KgMethod::ModE => dim,
            KgMethod::Hake => 2 * dim,
        }
    }

    /// Random initialization; phases uniform in `[−π, π)`, moduli positive.
    pub fn random(
        method: KgMethod,
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        hake_lambda: f64,
        seed: u64,
    ) -> Self {
        let mut rng = seeded(seed);
        let ew = Self::entity_width(method, dim);
        let rw = Self::relation_width(method, dim);
        let mut entities = Vec::with_capacity(n_entities * ew);
        for _ in 0..n_entities {
            for k in 0..ew {
                entities.push(match method {
                    KgMethod::RotatE => rng.random_range(-1.0..1.0),
                    KgMethod::Hake if k < dim => rng.random_range(0.5..1.5),
                    KgMethod::Hake => rng.random_range(-PI..PI),
                    KgMethod::ModE => rng.random_range(0.5..1.5),
                });
            }
        }
        let mut relations = Vec::with_capacity(n_relations * rw);
        for _ in 0..n_relations {
            for k in 0..rw {
                relations.push(match method {
                    KgMethod::RotatE => rng.random_range(-PI..PI),
                    KgMethod::Hake if k < dim => rng.random_range(0.5..1.5),
                    KgMethod::Hake => rng.random_range(-PI..PI),
                    KgMethod::ModE => rng.random_range(0.5..1.5),
                });
            }
        }
        Self {
            method,
            dim,
            n_entities,
            n_relations,
            entities,
            relations,
            hake_lambda,
            seed,
            epoch: 0,
            trained: false,
        }
    }

    pub fn ew(&self) -> usize {
        Self::entity_width(self.method, self.dim)
    }

    pub fn rw(&self) -> usize {
        Self::relation_width(self.method, self.dim)
    }

    pub fn entity(&self, e: usize) -> &[f64] {
        let w = self.ew();
        &self.entities[e * w..(e + 1) * w]
    }

    pub fn entity_mut(&mut self, e: usize) -> &mut [f64] {
        let w = self.ew();
        &mut self.entities[e * w..(e + 1) * w]
    }

    pub fn relation(&self, r: usize) -> &[f64] {
        let w = self.rw();
        &self.relations[r * w..(r + 1) * w]
    }

    pub fn relation_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.rw();
        &mut self.relations[r * w..(r + 1) * w]
    }

    pub fn check(&self, t: &Triple) -> Result<()> {
        for e in [t.head, t.tail] {
            if e >= self.n_entities {
                return Err(KgError::EntityOutOfRange(e));
            }
        }
        if t.relation >= self.n_relations {
            return Err(KgError::RelationOutOfRange(t.relation));
        }
        Ok(())
    }

    pub fn score(&self, t: &Triple) -> Result<f64> {
        self.check(t)?;
        Ok(self.score_unchecked(t))
    }

    pub(crate) fn score_unchecked(&self, t: &Triple) -> f64 {
        let (h, r, tl) = (
            self.entity(t.head),
            self.relation(t.relation),
            self.entity(t.tail),
        );
        let d = self.dim;
        match self.method {
            KgMethod::RotatE => {
                let mut sq = 0.0;
                for k in 0..d {
                    let (c, s) = (r[k].cos(), r[k].sin());
                    let a = h[k] * c - h[d + k] * s - tl[k];
                    let b = h[k] * s + h[d + k] * c - tl[d + k];
                    sq += a * a + b * b;
                }
                -sq.sqrt()
            }
            KgMethod::ModE => -modulus_distance(h, r, tl),
            KgMethod::Hake => {
                let m = modulus_distance(&h[..d], &r[..d], &tl[..d]);
                let p: f64 = (0..d)
                    .map(|k| ((h[d + k] + r[d + k] - tl[d + k]) / 2.0).sin().abs())
                    .sum();
                -m - self.hake_lambda * p
            }
        }
    }

    /// Score and its gradient with respect to the head, relation and tail rows.
    ///
    /// At a zero distance the norm is not differentiable; the gradient of that
    /// term is taken as zero.
    pub fn score_with_grad(&self, t: &Triple) -> Result<(f64, TripleGrad)> {
        self.check(t)?;
        let (h, r, tl) = (
            self.entity(t.head),
            self.relation(t.relation),
            self.entity(t.tail),
        );
        let d = self.dim;
        let mut g = TripleGrad {
            head: vec![0.0; h.len()],
            relation: vec![0.0; r.len()],
            tail: vec![0.0; tl.len()],
        };
        let score = match self.method {
            KgMethod::RotatE => {
                let mut a = vec![0.0; d];
                let mut b = vec![0.0; d];
                let mut sq = 0.0;
                for k in 0..d {
                    let (c, s) = (r[k].cos(), r[k].sin());
                    a[k] = h[k] * c - h[d + k] * s - tl[k];
                    b[k] = h[k] * s + h[d + k] * c - tl[d + k];
                    sq += a[k] * a[k] + b[k] * b[k];
                }
                let dist = sq.sqrt();
                if dist > 0.0 {
                    for k in 0..d {
                        let (c, s) = (r[k].cos(), r[k].sin());
                        // ∂score/∂a = −a/D, ∂score/∂b = −b/D
                        let ga = -a[k] / dist;
                        let gb = -b[k] / dist;
                        g.head[k] = ga * c + gb * s;
                        g.head[d + k] = -ga * s + gb * c;
                        g.relation[k] =
                            ga * (-h[k] * s - h[d + k] * c) + gb * (h[k] * c - h[d + k] * s);
                        g.tail[k] = -ga;
                        g.tail[d + k] = -gb;
                    }
                }
                -dist
            }
            KgMethod::ModE => {
                -modulus_distance_grad(h, r, tl, &mut g.head, &mut g.relation, &mut g.tail)
            }
            KgMethod::Hake => {
                let m = modulus_distance_grad(
                    &h[..d],
                    &r[..d],
                    &tl[..d],
                    &mut g.head[..d],
                    &mut g.relation[..d],
                    &mut g.tail[..d],
                );
                let mut p = 0.0;
                for k in 0..d {
                    let half = (h[d + k] + r[d + k] - tl[d + k]) / 2.0;
                    let s = half.sin();
                    p += s.abs();
                    // d/dx |sin(x/2)| = sign(sin) · cos(x/2) / 2
                    let dx = -self.hake_lambda * s.signum() * half.cos() / 2.0;
                    let dx = if s == 0.0 { 0.0 } else { dx };
                    g.head[d + k] = dx;
                    g.relation[d + k] = dx;
                    g.tail[d + k] = -dx;
                }
                -m - self.hake_lambda * p
            }
        };
        Ok((score, g))
    }

    /// Canonical flattened vector of an entity (its stored row), or `None`
    /// when the id is unknown.
    pub fn entity_vector(&self, e: usize) -> Option<Vec<f64>> {
        (e < self.n_entities).then(|| self.entity(e).to_vec())
    }

    /// Keeps phases in `[−π, π)` and ModE entity moduli positive.
    pub fn project(&mut self) {
        let d = self.dim;
        match self.method {
            KgMethod::RotatE => self.relations.iter_mut().for_each(|x| *x = wrap_phase(*x)),
            KgMethod::Hake => {
                let ew = self.ew();
                for (i, x) in self.entities.iter_mut().enumerate() {
                    if i % ew >= d {
                        *x = wrap_phase(*x);
                    }
                }
                let rw = self.rw();
                for (i, x) in self.relations.iter_mut().enumerate() {
                    if i % rw >= d {
                        *x = wrap_phase(*x);
                    }
                }
            }
            KgMethod::ModE => self
                .entities
                .iter_mut()
                .for_each(|x| *x = x.max(MIN_MODULUS)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entities
            .iter()
            .chain(&self.relations)
            .all(|x| x.is_finite())
    }
}

fn modulus_distance(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((h, r), t)| (h * r - t).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn modulus_distance_grad(
    h: &[f64],
    r: &[f64],
    t: &[f64],
    gh: &mut [f64],
    gr: &mut [f64],
    gt: &mut [f64],
) -> f64 {
    let diff: Vec<f64> = h
        .iter()
        .zip(r)
        .zip(t)
        .map(|((h, r), t)| h * r - t)
        .collect();
    let dist = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    if dist > 0.0 {
        for k in 0..h.len() {
            let g = -diff[k] / dist;
            gh[k] = g * r[k];
            gr[k] = g * h[k];
            gt[k] = -g;
        }
    }
    dist
}
