//! Release gate: one test per acceptance criterion, each printing a single
//! PASS/FAIL line (bypassing the harness's output capture) before asserting.

use hearhere_cli::audit::{kg_grad_audit, stance_grad_audit, GRAD_TOLERANCE};
use hearhere_cli::pipeline::{bootstrap, BootstrapOptions};
use hearhere_core::corpus::{
    build_vocab, synth_corpus, BundleEntry, CorpusSpec, Slot, TopicBundle,
};
use hearhere_core::feed::*;
use hearhere_core::kgraph::{
    build_graph, default_lexicon, shares_surface_form, train_kg_embedding, Camp, KgMethod,
    KgTrainConfig, DEFAULT_WINDOW,
};
use hearhere_core::opinion_map::{pairwise_affinities, tsne, OpinionMap, PointColor, TsneConfig};
use hearhere_core::stance::*;
use hearhere_core::study::*;
use hearhere_gateway::engine::{ArticleDetail, Feed, TopicEntry};
use hearhere_gateway::state::{NewSession, OpinionAck};
use hearhere_gateway::SESSION_HEADER;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

const IBETA_GRID: &str = include_str!("../../core/tests/data/ibeta_grid.csv");

/// Prints the verdict line straight to the process stdout, then fails the
/// test if the criterion does not hold.
fn verdict(criterion: &str, ok: bool, detail: String) {
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{} {criterion}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    )
    .unwrap();
    out.flush().unwrap();
    assert!(ok, "{criterion}: {detail}");
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---------- oracles ----------

/// Two-sided Student-t p-value for integer df by the closed-form
/// trigonometric series.
fn t_p_oracle(t: f64, df: u32) -> f64 {
    let theta = (t.abs() / f64::from(df).sqrt()).atan();
    let (s, c) = theta.sin_cos();
    let mut term = 1.0;
    let mut sum = 1.0;
    let (mut k, odd) = if df % 2 == 1 { (2, true) } else { (1, false) };
    if odd && df == 1 {
        sum = 0.0;
    }
    while k + 1 < df {
        term *= f64::from(k) / f64::from(k + 1) * c * c;
        sum += term;
        k += 2;
    }
    let a = if odd {
        2.0 / std::f64::consts::PI * (theta + s * c * sum)
    } else {
        s * sum
    };
    1.0 - a
}

/// Upper tail of F for the numerator dfs a three-group design produces.
fn f_p_oracle(f: f64, d1: u32, d2: u32) -> f64 {
    match d1 {
        1 => t_p_oracle(f.sqrt(), d2),
        2 => (f64::from(d2) / (f64::from(d2) + 2.0 * f)).powf(f64::from(d2) / 2.0),
        _ => unreachable!("oracle covers d1 of 1 and 2"),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn paired_t_oracle(pre: &[f64], post: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = post.iter().zip(pre).map(|(b, a)| b - a).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = m / (sd / n.sqrt());
    (t, t_p_oracle(t, d.len() as u32 - 1))
}

struct AnovaOracle {
    ss: [f64; 3],
    f: [f64; 3],
    p: [f64; 3],
}

/// Mixed ANOVA by the sums-of-squares definitions over the 2N raw
/// observations; effects in the order group, phase, interaction.
fn mixed_anova_oracle(scores: &[(f64, f64)], groups: &[usize], g: usize) -> AnovaOracle {
    let n = scores.len();
    let all: Vec<f64> = scores.iter().flat_map(|&(a, b)| [a, b]).collect();
    let grand = mean(&all);
    let ss_total: f64 = all.iter().map(|y| (y - grand).powi(2)).sum();
    let phase_mean = |p: usize| {
        mean(
            &scores
                .iter()
                .map(|s| if p == 0 { s.0 } else { s.1 })
                .collect::<Vec<_>>(),
        )
    };
    let ss_phase = n as f64 * (0..2).map(|p| (phase_mean(p) - grand).powi(2)).sum::<f64>();
    let (mut ss_group, mut ss_subj, mut ss_int) = (0.0, 0.0, 0.0);
    for k in 0..g {
        let members: Vec<(f64, f64)> = scores
            .iter()
            .zip(groups)
            .filter(|(_, &gr)| gr == k)
            .map(|(s, _)| *s)
            .collect();
        let nk = members.len() as f64;
        let gm = mean(
            &members
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .collect::<Vec<_>>(),
        );
        ss_group += 2.0 * nk * (gm - grand).powi(2);
        ss_subj += members
            .iter()
            .map(|&(a, b)| 2.0 * ((a + b) / 2.0 - gm).powi(2))
            .sum::<f64>();
        for p in 0..2 {
            let cell = mean(
                &members
                    .iter()
                    .map(|s| if p == 0 { s.0 } else { s.1 })
                    .collect::<Vec<_>>(),
            );
            ss_int += nk * (cell - gm - phase_mean(p) + grand).powi(2);
        }
    }
    let ss_err = ss_total - ss_group - ss_subj - ss_phase - ss_int;
    let (d_between, d_err) = ((g - 1) as u32, (n - g) as u32);
    let f_group = (ss_group / f64::from(d_between)) / (ss_subj / f64::from(d_err));
    let f_phase = ss_phase / (ss_err / f64::from(d_err));
    let f_int = (ss_int / f64::from(d_between)) / (ss_err / f64::from(d_err));
    AnovaOracle {
        ss: [ss_group, ss_phase, ss_int],
        f: [f_group, f_phase, f_int],
        p: [
            f_p_oracle(f_group, d_between, d_err),
            f_p_oracle(f_phase, 1, d_err),
            f_p_oracle(f_int, d_between, d_err),
        ],
    }
}

// ---------- criterion 1 ----------

#[test]
fn criterion_1_gradient_integrity() {
    let start = Instant::now();
    let mut audits = Vec::new();
    for (i, method) in KgMethod::ALL.into_iter().enumerate() {
        audits.push(kg_grad_audit(method, 20, 100 + i as u64).unwrap());
    }
    audits.push(stance_grad_audit(20, 200).unwrap());
    let secs = start.elapsed().as_secs_f64();
    let ok = audits.iter().all(|a| a.passed() && a.configs == 20) && secs < 120.0;
    let summary: Vec<String> = audits
        .iter()
        .map(|a| format!("{} max rel err {:.2e}", a.target, a.max_rel_error))
        .collect();
    verdict(
        "criterion 1 gradient integrity",
        ok,
        format!(
            "{} (tolerance {GRAD_TOLERANCE:e}, 20 configs each) in {secs:.1}s",
            summary.join(", ")
        ),
    );
}

// ---------- criterion 2 ----------

#[test]
fn criterion_2_learnability() {
    let start = Instant::now();
    let spec = CorpusSpec::new(6, 10, 20, 0.0, 7);
    let (articles, comments) = synth_corpus(&spec).unwrap();
    let vocab = build_vocab(&articles, &comments, 1).unwrap();
    let lex = default_lexicon();
    let camp = |camp: Camp, side: Polarity| {
        let posts: Vec<Vec<String>> = comments
            .iter()
            .filter(|c| c.origin.polarity() == Some(side))
            .map(|c| c.tokens.clone())
            .collect();
        let graph = build_graph(camp, &posts, &lex, DEFAULT_WINDOW, shares_surface_form).unwrap();
        let cfg = KgTrainConfig {
            dim: 8,
            epochs: 30,
            seed: 5,
            ..Default::default()
        };
        let (emb, _) = train_kg_embedding(&graph, &cfg).unwrap();
        CampKnowledge::new(graph, emb)
    };
    let kb = KnowledgeBase {
        lib: camp(Camp::Lib, Polarity::Liberal),
        con: camp(Camp::Con, Polarity::Conservative),
    };
    let data: Vec<LabeledArticle> = articles
        .iter()
        .map(|a| LabeledArticle {
            input: encode_article(a, &vocab, Some(&kb)).unwrap(),
            label: a.gold_stance.unwrap(),
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 50,
        seed: 1,
        ..Default::default()
    };
    let model = StanceModel::for_knowledge(&vocab, DEFAULT_D_W, Some(&kb), cfg.seed);
    let (_, history) = train(model, &data, &cfg).unwrap();
    let reached = history.iter().find(|h| h.accuracy >= 0.95).map(|h| h.epoch);
    let comment =
        train_comment_classifier(&comments, &vocab, DEFAULT_D_C, &TrainConfig::default()).unwrap();
    let split_ok = comment.train_ids.len() == (comments.len() as f64 * 0.75).round() as usize
        && comment.train_ids.len() + comment.test_ids.len() == comments.len();
    let secs = start.elapsed().as_secs_f64();
    let ok = data.len() == 120
        && reached.is_some()
        && comment.held_out_accuracy >= 0.95
        && split_ok
        && secs < 300.0;
    verdict(
        "criterion 2 learnability",
        ok,
        format!(
            "{} articles, training accuracy >= 0.95 at epoch {}, comment held-out accuracy {:.3} on {}/{} split, {secs:.1}s",
            data.len(),
            reached.map_or("never".into(), |e| e.to_string()),
            comment.held_out_accuracy,
            comment.train_ids.len(),
            comment.test_ids.len(),
        ),
    );
}

// ---------- criterion 3 ----------

fn random_bundle(rng: &mut ChaCha8Rng) -> TopicBundle {
    let mut entries = Vec::new();
    for polarity in [Polarity::Conservative, Polarity::Liberal] {
        for slot in [Slot::High, Slot::Moderate] {
            for _ in 0..5 {
                let id = format!("a{:05}", entries.len() * 1000 + rng.random_range(0..1000));
                // coarse values so that extremeness ties occur
                let extremeness = f64::from(rng.random_range(40..100u8)) / 100.0;
                entries.push(BundleEntry {
                    article_id: id,
                    polarity,
                    slot,
                    extremeness,
                });
            }
        }
    }
    for i in (1..entries.len()).rev() {
        entries.swap(i, rng.random_range(0..=i));
    }
    TopicBundle::new("t", entries).unwrap()
}

/// Expected feed: per polarity, the first k entries after sorting by (slot,
/// descending extremeness, id) with an independent comparator.
fn expected_feed(bundle: &TopicBundle, con: usize, lib: usize) -> Vec<String> {
    let mut out = Vec::new();
    for (polarity, k) in [(Polarity::Conservative, con), (Polarity::Liberal, lib)] {
        let mut pool: Vec<(u8, i64, String)> = bundle
            .stance_entries(polarity)
            .map(|e| {
                (
                    u8::from(e.slot == Slot::Moderate),
                    -(e.extremeness * 1e6).round() as i64,
                    e.article_id.clone(),
                )
            })
            .collect();
        pool.sort();
        out.extend(pool.into_iter().take(k).map(|e| e.2));
    }
    out
}

fn insertion_sort(xs: &[(usize, f64)], desc: bool) -> Vec<usize> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for x in xs {
        let pos = out
            .iter()
            .rposition(|y| if desc { y.1 >= x.1 } else { y.1 <= x.1 })
            .map_or(0, |p| p + 1);
        out.insert(pos, *x);
    }
    out.into_iter().map(|x| x.0).collect()
}

#[test]
fn criterion_3_feed_exactness() {
    let table = [(10, 0), (7, 3), (5, 5), (3, 7), (0, 10)];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut deviations = 0;
    for _ in 0..200 {
        let bundle = random_bundle(&mut rng);
        for (level, &(con, lib)) in (1..=5).zip(&table) {
            let level = RatioLevel::new(level).unwrap();
            let feed = apply_ratio(&bundle, level).unwrap();
            let count = |p: Polarity| {
                feed.iter()
                    .filter(|id| bundle.get(id).unwrap().polarity == p)
                    .count()
            };
            if level.composition() != (con, lib)
                || count(Polarity::Conservative) != con
                || count(Polarity::Liberal) != lib
                || feed != expected_feed(&bundle, con, lib)
            {
                deviations += 1;
            }
        }
    }
    let mut sort_mismatches = 0;
    for _ in 0..200 {
        let xs: Vec<(usize, f64)> = (0..rng.random_range(0..40))
            .map(|i| (i, f64::from(rng.random_range(0..10u8)) / 10.0))
            .collect();
        for (order, desc) in [(SortOrder::Asc, false), (SortOrder::Desc, true)] {
            let got: Vec<usize> = sort_extremeness(&xs, order, |x| x.1)
                .into_iter()
                .map(|x| x.0)
                .collect();
            if got != insertion_sort(&xs, desc) {
                sort_mismatches += 1;
            }
        }
    }
    verdict(
        "criterion 3 feed exactness",
        deviations == 0 && sort_mismatches == 0,
        format!("{deviations} ratio deviations over 200 bundles x 5 levels, {sort_mismatches} sort mismatches over 400 sorts"),
    );
}

// ---------- criterion 4 ----------

#[test]
fn criterion_4_banding() {
    let cases = [
        (0.95, Band::High),
        (0.949999, Band::Moderate),
        (0.80, Band::Moderate),
        (0.799999, Band::Low),
    ];
    let mut wrong = Vec::new();
    for (e, want) in cases {
        let rest = (1.0 - e) / 4.0;
        let dist = StanceDistribution::new([rest, rest, rest, rest, e]).unwrap();
        if Band::of(e) != want || band(&dist) != want || extremeness(&dist) != e {
            wrong.push(e);
        }
    }
    verdict(
        "criterion 4 banding",
        wrong.is_empty(),
        format!("boundaries 0.95/0.949999/0.80/0.799999, wrong at {wrong:?}"),
    );
}

// ---------- criterion 5 ----------

#[test]
fn criterion_5_statistics_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let mut t_worst = 0.0f64;
    let mut t_bad = 0;
    for _ in 0..50 {
        let n = rng.random_range(3..40);
        let shift = rng.random_range(-1.0..1.0);
        let pre: Vec<f64> = (0..n).map(|_| 3.0 + normal(&mut rng)).collect();
        let post: Vec<f64> = pre.iter().map(|x| x + shift + normal(&mut rng)).collect();
        let got = paired_t_test(&pre, &post).unwrap();
        let (t, p) = paired_t_oracle(&pre, &post);
        t_worst = t_worst
            .max((got.statistic - t).abs())
            .max((got.p_value - p).abs());
        if !close(got.statistic, t, 1e-9)
            || !close(got.p_value, p, 1e-9)
            || got.df != Df::One((n - 1) as f64)
        {
            t_bad += 1;
        }
    }

    let mut f_worst = 0.0f64;
    let mut f_bad = 0;
    for _ in 0..50 {
        let sizes: Vec<usize> = (0..3).map(|_| rng.random_range(2..12)).collect();
        let groups: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &k)| std::iter::repeat_n(g, k))
            .collect();
        let effect: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scores: Vec<(f64, f64)> = groups
            .iter()
            .map(|&g| {
                let base = 3.0 + normal(&mut rng);
                (base, base + effect[g] + 0.5 * normal(&mut rng))
            })
            .collect();
        let got = mixed_anova(&scores, &groups).unwrap();
        let want = mixed_anova_oracle(&scores, &groups, 3);
        for (i, e) in [&got.group, &got.phase, &got.interaction]
            .into_iter()
            .enumerate()
        {
            f_worst = f_worst
                .max((e.test.statistic - want.f[i]).abs())
                .max((e.test.p_value - want.p[i]).abs());
            if !close(e.ss, want.ss[i], 1e-9)
                || !close(e.test.statistic, want.f[i], 1e-9)
                || !close(e.test.p_value, want.p[i], 1e-9)
            {
                f_bad += 1;
            }
        }
    }

    let printed = [
        (6, [0.00833, 0.00166, 0.00016]),
        (4, [0.0125, 0.0025, 0.00025]),
        (7, [0.00714, 0.00142, 0.00014]),
    ];
    let bonferroni_ok = printed
        .iter()
        .all(|&(m, want)| Thresholds::new(m).unwrap().printed == want);

    let mut grid_worst = 0.0f64;
    let mut rows = 0;
    for line in IBETA_GRID.lines().filter(|l| !l.trim().is_empty()) {
        let v: Vec<f64> = line.split(',').map(|s| s.trim().parse().unwrap()).collect();
        grid_worst = grid_worst.max((incomplete_beta(v[0], v[1], v[2]).unwrap() - v[3]).abs());
        rows += 1;
    }
    let ok = t_bad == 0 && f_bad == 0 && bonferroni_ok && rows == 50 && grid_worst < 1e-10;
    verdict(
        "criterion 5 statistics exactness",
        ok,
        format!(
            "t-test max dev {t_worst:.1e} ({t_bad} bad of 50), ANOVA max dev {f_worst:.1e} ({f_bad} bad effects of 150), \
             bonferroni printed thresholds {}, incomplete beta max err {grid_worst:.1e} over {rows} points",
            if bonferroni_ok { "match" } else { "differ" },
        ),
    );
}

// ---------- criterion 6 ----------

fn two_clusters(seed: u64, per: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2 * per)
        .map(|i| {
            let c = if i < per { 5.0 } else { -5.0 };
            (0..16).map(|_| c + rng.random_range(-1.0..1.0)).collect()
        })
        .collect()
}

/// Fraction of points closer to their own group's 2-D centroid.
fn centroid_agreement(y: &[[f64; 2]], per: usize) -> f64 {
    let centroid = |r: std::ops::Range<usize>| {
        let k = r.len() as f64;
        let (sx, sy) = y[r]
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / k, sy / k]
    };
    let cs = [centroid(0..per), centroid(per..2 * per)];
    let d = |p: &[f64; 2], c: &[f64; 2]| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
    let hits = y.iter().enumerate().filter(|(i, p)| {
        let own = usize::from(*i >= per);
        d(p, &cs[own]) < d(p, &cs[1 - own])
    });
    hits.count() as f64 / y.len() as f64
}

/// Largest deviation of a row's perplexity, recomputed from its bandwidth,
/// from the target.
fn perplexity_deviation(x: &[Vec<f64>], sigmas: &[f64], target: f64) -> f64 {
    let n = x.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let s2 = 2.0 * sigmas[i] * sigmas[i];
        let w: Vec<f64> = (0..n)
            .map(|j| {
                if j == i {
                    0.0
                } else {
                    (-x[i]
                        .iter()
                        .zip(&x[j])
                        .map(|(p, q)| (p - q).powi(2))
                        .sum::<f64>()
                        / s2)
                        .exp()
                }
            })
            .collect();
        let z: f64 = w.iter().sum();
        let h: f64 = -w
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|v| (v / z) * (v / z).log2())
            .sum::<f64>();
        worst = worst.max((h.exp2() - target).abs());
    }
    worst
}

#[test]
fn criterion_6_tsne_quality() {
    let x = two_clusters(9, 50);
    let cfg = TsneConfig::default();
    let start = Instant::now();
    let run = tsne(&x, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let perp_dev = [5.0, cfg.perplexity, 30.0]
        .into_iter()
        .map(|p| perplexity_deviation(&x, &pairwise_affinities(&x, p).unwrap().sigmas, p))
        .fold(0.0f64, f64::max)
        .max(perplexity_deviation(
            &x,
            &run.affinities.sigmas,
            cfg.perplexity,
        ));
    let recovery = centroid_agreement(&run.y, 50);
    let post_exaggeration = run.objectives[cfg.exaggeration_iterations];
    let last = *run.objectives.last().unwrap();
    let again = tsne(&x, &cfg).unwrap();
    let identical = run.y.len() == again.y.len()
        && run
            .y
            .iter()
            .zip(&again.y)
            .all(|(a, b)| a[0].to_bits() == b[0].to_bits() && a[1].to_bits() == b[1].to_bits());
    let ok = perp_dev < 1e-3
        && recovery >= 0.95
        && last <= post_exaggeration
        && identical
        && secs < 60.0;
    verdict(
        "criterion 6 t-SNE quality",
        ok,
        format!(
            "perplexity dev {perp_dev:.1e}, cluster recovery {recovery:.2}, objective {last:.4} after vs {post_exaggeration:.4} \
             at end of exaggeration, rerun {}, n=100 in {secs:.1}s",
            if identical { "bit-identical" } else { "differs" },
        ),
    );
}

// ---------- criterion 7 ----------

struct ServerProcess {
    child: Child,
    base: String,
}

impl ServerProcess {
    fn spawn(config: &Path) -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_hearhere"))
            .args(["serve", "--config"])
            .arg(config)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let ready: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(ready["event"], "ready");
        let addr: SocketAddr = ready["addr"].as_str().unwrap().parse().unwrap();
        Self {
            child,
            base: format!("http://{addr}"),
        }
    }

    /// SIGKILL: no shutdown hook gets a chance to flush anything.
    fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct Client {
    agent: ureq::Agent,
    base: String,
}

impl Client {
    fn new(base: &str) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build();
        Self {
            agent: config.into(),
            base: base.to_string(),
        }
    }

    fn get_raw(&self, path: &str, token: Option<&str>) -> (u16, String) {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header(SESSION_HEADER, t);
        }
        let mut resp = req.call().unwrap();
        (
            resp.status().as_u16(),
            resp.body_mut().read_to_string().unwrap(),
        )
    }

    fn get<T: serde::de::DeserializeOwned>(&self, path: &str, token: Option<&str>) -> T {
        let (status, body) = self.get_raw(path, token);
        assert_eq!(status, 200, "GET {path}: {body}");
        serde_json::from_str(&body).unwrap()
    }

    fn post<T: serde::de::DeserializeOwned>(
        &self,
        path: &str,
        token: Option<&str>,
        body: serde_json::Value,
    ) -> T {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header(SESSION_HEADER, t);
        }
        let mut resp = req.send_json(&body).unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        assert!(
            status == 200 || status == 201,
            "POST {path}: {status} {text}"
        );
        serde_json::from_str(&text).unwrap()
    }
}

struct Script {
    stance: u8,
    interest: u8,
    pre: [u8; 5],
    post: [u8; 5],
}

const SCRIPTS: [Script; 3] = [
    Script {
        stance: 1,
        interest: 4,
        pre: [2, 3, 4, 2, 1],
        post: [3, 4, 4, 3, 2],
    },
    Script {
        stance: 5,
        interest: 2,
        pre: [1, 2, 5, 1, 2],
        post: [3, 2, 4, 2, 2],
    },
    Script {
        stance: 2,
        interest: 3,
        pre: [3, 3, 3, 2, 1],
        post: [4, 5, 3, 2, 3],
    },
];

struct Outcome {
    participant: String,
    token: String,
    own: usize,
    opposing: usize,
}

/// One participant's scripted session. Returns its expected consumption.
fn run_script(c: &Client, s: &Script, topics: &[String]) -> Outcome {
    let session: NewSession = c.post("/api/session", None, serde_json::json!({}));
    let token = session.session_id.as_str();
    let _: SurveyRecord = c.post(
        "/api/survey/pre",
        Some(token),
        serde_json::json!({
            "answers": s.pre,
            "demographics": {"gender": "other", "age": "30-39", "political_interest": s.interest,
                             "political_stance": s.stance, "media_usage": 3}
        }),
    );
    let declared = StanceGroup::of(s.stance).polarity().unwrap();
    let (mut own, mut opposing) = (0, 0);
    let mut opened: Vec<String> = Vec::new();
    for topic in topics {
        for ratio in [1, 3, 5] {
            let feed: Feed = c.get(&format!("/api/feed?topic={topic}&ratio={ratio}"), None);
            assert_eq!(feed.articles.len(), FEED_SIZE);
            // one unopened card from each of the three feeds
            let card = feed
                .articles
                .iter()
                .find(|a| !opened.contains(&a.id))
                .unwrap();
            let detail: ArticleDetail = c.get(&format!("/api/article/{}", card.id), Some(token));
            assert_eq!(detail.stance, card.stance);
            if card.stance == declared {
                own += 1;
            } else {
                opposing += 1;
            }
            opened.push(card.id.clone());
        }
    }
    // two opinions: typed text on the first topic, a chosen example on the second
    for (i, topic) in topics.iter().enumerate() {
        let before: OpinionMap = c.get(&format!("/api/map?topic={topic}"), Some(token));
        let body = if i == 0 {
            serde_json::json!({"topic": topic, "text": format!("{} view on {topic}", session.participant)})
        } else {
            let ex: serde_json::Value = c.get(&format!("/api/examples?topic={topic}"), None);
            serde_json::json!({"topic": topic, "example_id": ex["examples"][0]["id"]})
        };
        let ack: OpinionAck = c.post("/api/opinion", Some(token), body);
        assert_eq!(ack.map.points.len(), before.points.len() + 1);
        assert_eq!(
            ack.map.count(PointColor::Yellow),
            before.count(PointColor::Yellow) + 1
        );
    }
    let _: SurveyRecord = c.post(
        "/api/survey/post",
        Some(token),
        serde_json::json!({ "answers": s.post }),
    );
    Outcome {
        participant: session.participant,
        token: session.session_id,
        own,
        opposing,
    }
}

/// Mismatches between a report and what the script implies.
fn audit_report(report: &StudyReport, outcomes: &[Outcome]) -> Vec<String> {
    let mut issues = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            issues.push(what);
        }
    };
    check(
        report.participants == SCRIPTS.len() && report.incomplete.is_empty(),
        "participant count".into(),
    );
    let score = |a: &[u8; 5]| a.iter().map(|&x| f64::from(x)).sum::<f64>() / 5.0;
    for (q, row) in report.overall.iter().enumerate() {
        let pick = |a: &[u8; 5]| if q < 5 { f64::from(a[q]) } else { score(a) };
        let pre: Vec<f64> = SCRIPTS.iter().map(|s| pick(&s.pre)).collect();
        let post: Vec<f64> = SCRIPTS.iter().map(|s| pick(&s.post)).collect();
        check(row.n == SCRIPTS.len(), format!("{} n", row.label));
        check(
            close(row.mean_pre, mean(&pre), 1e-12) && close(row.mean_post, mean(&post), 1e-12),
            format!("{} means", row.label),
        );
        check(
            close(row.mean_diff, row.mean_post - row.mean_pre, 1e-12),
            format!("{} mean diff", row.label),
        );
        let Some(test) = &row.test else {
            check(false, format!("{} has no test", row.label));
            continue;
        };
        let m = report.overall_thresholds.comparisons;
        if test.degenerate {
            check(
                row.sd_diff == 0.0 || row.sd_diff < 1e-12,
                format!("{} degenerate with spread", row.label),
            );
        } else {
            let (t, p) = paired_t_oracle(&pre, &post);
            let n = row.n as f64;
            check(
                close(
                    test.statistic,
                    row.mean_diff / (row.sd_diff / n.sqrt()),
                    1e-9,
                ),
                format!("{} t vs summary", row.label),
            );
            check(
                close(test.statistic, t, 1e-9) && close(test.p_value, p, 1e-9),
                format!("{} t vs oracle", row.label),
            );
        }
        check(
            test.df == Df::One((row.n - 1) as f64),
            format!("{} df", row.label),
        );
        check(
            row.significant == Some(test.p_value < report.alpha / m as f64),
            format!("{} significance", row.label),
        );
        let stars = report
            .overall_thresholds
            .exact
            .iter()
            .filter(|&&th| test.p_value < th)
            .count();
        check(
            test.significant_at.map_or(0, |s| s as usize + 1) == stars,
            format!("{} stars", row.label),
        );
    }
    let Some(cons) = &report.consumption else {
        issues.push("no consumption section".into());
        return issues;
    };
    check(cons.kind == ReadKind::ArticleOpen, "read kind".into());
    check(
        cons.total_reads == 6 * outcomes.len(),
        format!("total reads {}", cons.total_reads),
    );
    check(cons.sessions.len() == outcomes.len(), "session rows".into());
    for o in outcomes {
        match cons.sessions.iter().find(|s| s.session_id == o.participant) {
            Some(s) => check(
                s.reads == 6
                    && s.distinct_articles == 6
                    && s.own_reads == o.own
                    && s.opposing_reads == o.opposing,
                format!(
                    "{} consumption {}/{} vs scripted {}/{}",
                    o.participant, s.own_reads, s.opposing_reads, o.own, o.opposing
                ),
            ),
            None => check(false, format!("{} missing from consumption", o.participant)),
        }
    }
    let own: usize = outcomes.iter().map(|o| o.own).sum();
    let opposing: usize = outcomes.iter().map(|o| o.opposing).sum();
    check(
        cons.own_reads == own && cons.opposing_reads == opposing,
        "consumption totals".into(),
    );
    issues
}

#[test]
fn criterion_7_end_to_end_gateway() {
    let dir = tempfile::tempdir().unwrap();
    let opts = BootstrapOptions {
        bind: "127.0.0.1:0".into(),
        ..Default::default()
    };
    let summary = bootstrap(dir.path(), &opts).unwrap();

    let server = ServerProcess::spawn(&summary.config);
    let c = Client::new(&server.base);
    let topics: Vec<String> = c
        .get::<Vec<TopicEntry>>("/api/topics", None)
        .into_iter()
        .filter(|t| t.available)
        .map(|t| t.topic.id)
        .take(2)
        .collect();
    assert_eq!(topics.len(), 2);
    let outcomes: Vec<Outcome> = SCRIPTS.iter().map(|s| run_script(&c, s, &topics)).collect();

    let (status, body) = c.get_raw("/api/report", None);
    assert_eq!(status, 200, "{body}");
    let report: StudyReport = serde_json::from_str(&body).unwrap();
    let issues = audit_report(&report, &outcomes);
    let maps_before: Vec<String> = topics
        .iter()
        .flat_map(|t| {
            outcomes
                .iter()
                .map(move |o| (t, Some(o.token.as_str())))
                .chain([(t, None)])
        })
        .map(|(t, tok)| c.get_raw(&format!("/api/map?topic={t}"), tok).1)
        .collect();
    server.kill();

    let server = ServerProcess::spawn(&summary.config);
    let c = Client::new(&server.base);
    let (status2, body2) = c.get_raw("/api/report", None);
    let maps_after: Vec<String> = topics
        .iter()
        .flat_map(|t| {
            outcomes
                .iter()
                .map(move |o| (t, Some(o.token.as_str())))
                .chain([(t, None)])
        })
        .map(|(t, tok)| c.get_raw(&format!("/api/map?topic={t}"), tok).1)
        .collect();
    drop(server);
    let identical = status2 == 200 && body2 == body && maps_after == maps_before;

    let ok = issues.is_empty() && identical;
    verdict(
        "criterion 7 end-to-end gateway",
        ok,
        format!(
            "{} participants, {} reads logged, report issues {:?}, report and maps after SIGKILL restart {}",
            outcomes.len(),
            report.consumption.as_ref().map_or(0, |c| c.total_reads),
            issues,
            if identical { "identical" } else { "differ" },
        ),
    );
}
