//! Nearest-neighbor label ranking and the comparison methods.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::LabelId;
use crate::error::{Error, Result};
use crate::math::{gd_descend, ridge_solve, GdConfig, Mat};
use crate::nsm::map_point;

/// Candidate labels ordered by ascending distance, ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub entries: Vec<(LabelId, f64)>,
}

impl Ranking {
    /// 1-based position of `label`.
    pub fn rank_of(&self, label: LabelId) -> Option<usize> {
        self.entries
            .iter()
            .position(|(l, _)| *l == label)
            .map(|p| p + 1)
    }

    pub fn top(&self) -> Option<LabelId> {
        self.entries.first().map(|(l, _)| *l)
    }

    pub fn labels(&self) -> Vec<LabelId> {
        self.entries.iter().map(|(l, _)| *l).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Builds a ranking from explicit `(label, score)` pairs sorted by the
    /// same rule as [`rank_candidates`].
    pub fn from_scores(mut entries: Vec<(LabelId, f64)>) -> Self {
        entries.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        entries.dedup_by_key(|e| e.0);
        Self { entries }
    }
}

fn dedup_candidates(candidates: &[LabelId]) -> Vec<LabelId> {
    let mut c = candidates.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

/// Ranks `candidates` by Euclidean distance from `point` to their rows of `embedding`.
pub fn rank_candidates(point: &[f64], embedding: &Mat, candidates: &[LabelId]) -> Result<Ranking> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate labels"));
    }
    if point.len() != embedding.ncols() {
        return Err(Error::shape(format!(
            "point is {}-dim, embedding is {}-dim",
            point.len(),
            embedding.ncols()
        )));
    }
    let mut entries = Vec::with_capacity(candidates.len());
    for id in dedup_candidates(candidates) {
        if id.0 >= embedding.nrows() {
            return Err(Error::invalid(format!(
                "candidate label {} has no embedding row",
                id.0
            )));
        }
        let d2: f64 = embedding
            .row(id.0)
            .iter()
            .zip(point)
            .map(|(e, p)| (e - p) * (e - p))
            .sum();
        entries.push((id, d2.sqrt()));
    }
    entries.sort_by(|a, b| match a.1.partial_cmp(&b.1) {
        Some(Ordering::Equal) | None => a.0.cmp(&b.0),
        Some(o) => o,
    });
    Ok(Ranking { entries })
}

/// Ridge map from instance features to the target row of each instance's label.
pub fn fit_lm(x: &Mat, labels: &[LabelId], targets: &Mat, lam: f64) -> Result<Mat> {
    if labels.len() != x.nrows() {
        return Err(Error::shape(format!(
            "{} labels for {} instances",
            labels.len(),
            x.nrows()
        )));
    }
    let mut y = Mat::zeros(x.nrows(), targets.ncols());
    for (k, id) in labels.iter().enumerate() {
        if id.0 >= targets.nrows() {
            return Err(Error::invalid(format!("label {} has no target row", id.0)));
        }
        y.row_mut(k).copy_from(&targets.row(id.0));
    }
    ridge_solve(x, &y, lam)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConseConfig {
    /// Number of most probable seen classes combined per instance.
    pub top_t: usize,
    /// L2 penalty on the non-bias softmax weights.
    pub l2: f64,
    pub gd: GdConfig,
}

impl Default for ConseConfig {
    fn default() -> Self {
        Self {
            top_t: 5,
            l2: 1e-3,
            gd: GdConfig {
                step_size: 1.0,
                ..GdConfig::default()
            },
        }
    }
}

impl ConseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_t == 0 {
            return Err(Error::invalid("ConSE top_t must be >= 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid(format!(
                "ConSE l2 must be >= 0, got {}",
                self.l2
            )));
        }
        self.gd.validate()
    }
}

/// Softmax classifier over seen classes plus the semantic table used to
/// embed its predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConseModel {
    /// `(f + 1) x |seen|`; the last row is the bias.
    pub weights: Mat,
    /// Seen label for each softmax output.
    pub classes: Vec<LabelId>,
    pub top_t: usize,
    /// Semantic vectors for every class, indexed by label id.
    pub semantics: Mat,
}

fn with_bias(x: &Mat) -> Mat {
    x.clone().insert_column(x.ncols(), 1.0)
}

fn softmax_rows(logits: &mut Mat) {
    for mut row in logits.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row.unscale_mut(sum);
    }
}

/// Mean cross-entropy plus `l2 * ||W_nobias||^2`, and its gradient.
fn softmax_loss(weights: &Mat, xb: &Mat, targets: &[usize], l2: f64) -> (f64, Mat) {
    let n = xb.nrows() as f64;
    let mut probs = xb * weights;
    softmax_rows(&mut probs);
    let mut loss = 0.0;
    for (k, &t) in targets.iter().enumerate() {
        loss -= probs[(k, t)].max(f64::MIN_POSITIVE).ln();
        probs[(k, t)] -= 1.0;
    }
    let mut grad = xb.transpose() * probs / n;
    let bias = weights.nrows() - 1;
    let mut penalty = 0.0;
    for i in 0..bias {
        for j in 0..weights.ncols() {
            let w = weights[(i, j)];
            penalty += w * w;
            grad[(i, j)] += 2.0 * l2 * w;
        }
    }
    (loss / n + l2 * penalty, grad)
}

/// Outcome of [`fit_conse`].
#[derive(Debug, Clone)]
pub struct ConseFit {
    pub model: ConseModel,
    pub trace: Vec<f64>,
}

/// Full-batch softmax regression on seen-class instances.
///
/// `semantics` must hold a row for every label id; it is stored as given.
pub fn fit_conse(
    x: &Mat,
    labels: &[LabelId],
    semantics: &Mat,
    cfg: &ConseConfig,
) -> Result<ConseFit> {
    cfg.validate()?;
    if labels.len() != x.nrows() {
        return Err(Error::shape(format!(
            "{} labels for {} instances",
            labels.len(),
            x.nrows()
        )));
    }
    let classes = dedup_candidates(labels);
    if classes.len() < 2 {
        return Err(Error::invalid("ConSE needs at least two seen classes"));
    }
    if let Some(bad) = classes.iter().find(|id| id.0 >= semantics.nrows()) {
        return Err(Error::invalid(format!(
            "label {} has no semantic vector",
            bad.0
        )));
    }
    let targets: Vec<usize> = labels
        .iter()
        .map(|id| {
            classes
                .binary_search(id)
                .expect("class list built from labels")
        })
        .collect();
    let xb = with_bias(x);
    let w0 = Mat::zeros(xb.ncols(), classes.len());
    let descent = gd_descend(
        |p| {
            let (v, g) = softmax_loss(&p[0], &xb, &targets, cfg.l2);
            Ok((v, vec![g]))
        },
        vec![w0],
        &cfg.gd,
    )?;
    let trace = descent.trace;
    let weights = descent.params.into_iter().next().expect("one block");
    Ok(ConseFit {
        model: ConseModel {
            weights,
            classes,
            top_t: cfg.top_t,
            semantics: semantics.clone(),
        },
        trace,
    })
}

impl ConseModel {
    /// Softmax probabilities over `self.classes`.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() + 1 != self.weights.nrows() {
            return Err(Error::shape(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.weights.nrows() - 1
            )));
        }
        let mut xb = x.to_vec();
        xb.push(1.0);
        let mut logits = Mat::from_row_slice(1, xb.len(), &xb) * &self.weights;
        softmax_rows(&mut logits);
        Ok(logits.iter().copied().collect())
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<LabelId> {
        let p = self.probabilities(x)?;
        Ok(self.classes[top_indices(&p, 1)[0]])
    }
}

/// Indices of the `t` largest values, ties by lower index.
fn top_indices(values: &[f64], t: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(t);
    idx
}

/// Probability-weighted mean of the top-T seen-class semantic vectors.
pub fn conse_embed(model: &ConseModel, x: &[f64]) -> Result<DVector<f64>> {
    let p = model.probabilities(x)?;
    let top = top_indices(&p, model.top_t);
    let mut out = DVector::zeros(model.semantics.ncols());
    let mut total = 0.0;
    for &c in &top {
        out += model.semantics.row(model.classes[c].0).transpose() * p[c];
        total += p[c];
    }
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Numeric("top-T probabilities sum to zero".into()));
    }
    Ok(out / total)
}

/// The five compared methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodKind {
    #[serde(rename = "NSM_PB")]
    NsmPb,
    #[serde(rename = "LM_PB")]
    LmPb,
    #[serde(rename = "LM")]
    Lm,
    #[serde(rename = "NSM")]
    Nsm,
    #[serde(rename = "CONSE")]
    Conse,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [Self::NsmPb, Self::LmPb, Self::Lm, Self::Nsm, Self::Conse];

    pub fn name(self) -> &'static str {
        match self {
            Self::NsmPb => "NSM_PB",
            Self::LmPb => "LM_PB",
            Self::Lm => "LM",
            Self::Nsm => "NSM",
            Self::Conse => "CONSE",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// A fitted method.
///
/// All but ConSE are a linear map from features into a class space followed
/// by nearest-neighbor ranking against that space's class rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    NsmPb { map: Mat, classes: Mat },
    LmPb { map: Mat, classes: Mat },
    Lm { map: Mat, classes: Mat },
    Nsm { map: Mat, classes: Mat },
    Conse { model: ConseModel },
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Method::NsmPb { .. } => MethodKind::NsmPb,
            Method::LmPb { .. } => MethodKind::LmPb,
            Method::Lm { .. } => MethodKind::Lm,
            Method::Nsm { .. } => MethodKind::Nsm,
            Method::Conse { .. } => MethodKind::Conse,
        }
    }

    /// Image of `x` in the method's class space together with that space.
    pub fn embed(&self, x: &[f64]) -> Result<(DVector<f64>, &Mat)> {
        match self {
            Method::NsmPb { map, classes }
            | Method::LmPb { map, classes }
            | Method::Lm { map, classes }
            | Method::Nsm { map, classes } => {
                if map.nrows() != x.len() {
                    return Err(Error::shape(format!(
                        "instance has {} features, map expects {}",
                        x.len(),
                        map.nrows()
                    )));
                }
                Ok((map_point(x, map), classes))
            }
            Method::Conse { model } => Ok((conse_embed(model, x)?, &model.semantics)),
        }
    }
}

/// Ranks `candidates` for instance `x` under `method`.
pub fn predict(method: &Method, x: &[f64], candidates: &[LabelId]) -> Result<Ranking> {
    let (point, classes) = method.embed(x)?;
    rank_candidates(point.as_slice(), classes, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{from_rows, l2_normalize_rows};
    use crate::rng::{gaussian_mat, seeded_rng};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ids(v: &[usize]) -> Vec<LabelId> {
        v.iter().copied().map(LabelId).collect()
    }

    #[test]
    fn exact_hit_ranks_first() {
        let e = l2_normalize_rows(&gaussian_mat(5, 3, 1.0, &mut seeded_rng(1))).mat;
        let point: Vec<f64> = e.row(3).iter().copied().collect();
        let r = rank_candidates(&point, &e, &ids(&[0, 1, 2, 3, 4])).unwrap();
        assert_eq!(r.entries[0], (LabelId(3), 0.0));
        assert_eq!(r.rank_of(LabelId(3)), Some(1));
    }

    #[test]
    fn ties_break_on_label_id() {
        let e = from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let r = rank_candidates(&[0.0, 0.0], &e, &ids(&[2, 0, 1])).unwrap();
        assert_eq!(r.labels(), ids(&[0, 1, 2]));
    }

    #[test]
    fn ranking_errors() {
        let e = Mat::identity(2, 2);
        assert!(matches!(
            rank_candidates(&[0.0, 0.0], &e, &[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            rank_candidates(&[0.0], &e, &ids(&[0])),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            rank_candidates(&[0.0, 0.0], &e, &ids(&[5])),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ranking_matches_brute_force_argsort() {
        for seed in 0..20 {
            let mut rng = seeded_rng(seed);
            let e = gaussian_mat(10, 4, 1.0, &mut rng);
            let p: Vec<f64> = gaussian_mat(1, 4, 1.0, &mut rng).iter().copied().collect();
            let r = rank_candidates(&p, &e, &ids(&(0..10).collect::<Vec<_>>())).unwrap();
            let mut brute: Vec<(f64, usize)> = (0..10)
                .map(|i| {
                    let d: f64 = (0..4).map(|j| (e[(i, j)] - p[j]).powi(2)).sum();
                    (d, i)
                })
                .collect();
            brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(
                r.labels(),
                ids(&brute.iter().map(|b| b.1).collect::<Vec<_>>())
            );
        }
    }

    #[test]
    fn lm_recovers_realizable_map() {
        let mut rng = seeded_rng(2);
        let x = gaussian_mat(30, 4, 1.0, &mut rng);
        let z = gaussian_mat(4, 3, 1.0, &mut rng);
        // One label per instance so every target row is reachable.
        let targets = &x * &z;
        let labels = ids(&(0..30).collect::<Vec<_>>());
        let map = fit_lm(&x, &labels, &targets, 0.0).unwrap();
        assert_abs_diff_eq!(map, z, epsilon = 1e-6);
    }

    #[test]
    fn lm_shrinks_with_penalty() {
        let mut rng = seeded_rng(3);
        let x = gaussian_mat(40, 5, 1.0, &mut rng);
        let targets = gaussian_mat(4, 6, 1.0, &mut rng);
        let labels: Vec<LabelId> = (0..40).map(|k| LabelId(k % 4)).collect();
        let norms: Vec<f64> = [0.0, 1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&lam| fit_lm(&x, &labels, &targets, lam).unwrap().norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
    }

    #[test]
    fn lm_normal_equations() {
        let mut rng = seeded_rng(4);
        let x = gaussian_mat(50, 6, 1.0, &mut rng);
        let targets = gaussian_mat(5, 3, 1.0, &mut rng);
        let labels: Vec<LabelId> = (0..50).map(|k| LabelId(k % 5)).collect();
        let lam = 0.7;
        let map = fit_lm(&x, &labels, &targets, lam).unwrap();
        let y = Mat::from_fn(50, 3, |k, j| targets[(k % 5, j)]);
        let resid = x.transpose() * (&x * &map - y) + &map * lam;
        assert!(resid.norm() <= 1e-8);
    }

    fn two_blobs(seed: u64) -> (Mat, Vec<LabelId>) {
        let mut rng = seeded_rng(seed);
        let mut x = gaussian_mat(60, 2, 0.3, &mut rng);
        let mut labels = Vec::new();
        for k in 0..60 {
            let c = k % 2;
            x[(k, 0)] += if c == 0 { -3.0 } else { 3.0 };
            labels.push(LabelId(c));
        }
        (x, labels)
    }

    #[test]
    fn conse_separates_blobs() {
        let (x, labels) = two_blobs(5);
        let sem = Mat::identity(2, 2);
        let fit = fit_conse(&x, &labels, &sem, &ConseConfig::default()).unwrap();
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        let correct = (0..60)
            .filter(|&k| {
                let row: Vec<f64> = x.row(k).iter().copied().collect();
                fit.model.predict_class(&row).unwrap() == labels[k]
            })
            .count();
        assert!(correct as f64 / 60.0 >= 0.99);
    }

    #[test]
    fn conse_no_signal_gives_uniform() {
        // Constant features carry no information, so only the bias can fit
        // the balanced class frequencies.
        let x = Mat::from_element(300, 3, 0.5);
        let labels: Vec<LabelId> = (0..300).map(|k| LabelId(k % 3)).collect();
        let cfg = ConseConfig {
            l2: 0.1,
            ..ConseConfig::default()
        };
        let fit = fit_conse(&x, &labels, &Mat::identity(3, 3), &cfg).unwrap();
        for p in fit.model.probabilities(&[0.5, 0.5, 0.5]).unwrap() {
            assert!((p - 1.0 / 3.0).abs() <= 1e-6, "{p}");
        }
    }

    #[test]
    fn conse_requires_two_classes() {
        let x = Mat::zeros(3, 2);
        let err = fit_conse(
            &x,
            &ids(&[0, 0, 0]),
            &Mat::identity(2, 2),
            &ConseConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    fn manual_model(weights_row: Vec<f64>, sem: Mat, top_t: usize) -> ConseModel {
        // Zero features, so the bias row alone sets the probabilities.
        let k = weights_row.len();
        let mut w = Mat::zeros(2, k);
        w.row_mut(1).copy_from_slice(&weights_row);
        ConseModel {
            weights: w,
            classes: ids(&(0..k).collect::<Vec<_>>()),
            top_t,
            semantics: sem,
        }
    }

    #[test]
    fn conse_embed_cases() {
        let sem = from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]).unwrap();
        let dominant = manual_model(vec![50.0, 0.0, 0.0], sem.clone(), 5);
        let e = conse_embed(&dominant, &[0.0]).unwrap();
        assert_abs_diff_eq!(e, DVector::from_vec(vec![1.0, 0.0]), epsilon = 1e-9);

        let tied = manual_model(vec![0.0, 0.0, -60.0], sem.clone(), 2);
        let e = conse_embed(&tied, &[0.0]).unwrap();
        assert_abs_diff_eq!(e, DVector::from_vec(vec![0.5, 0.5]), epsilon = 1e-12);

        // T beyond the class count: plain probability-weighted mean.
        let m = manual_model(vec![0.3, -0.2, 1.1], sem.clone(), 10);
        let p = m.probabilities(&[0.0]).unwrap();
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let expect = sem.transpose() * DVector::from_vec(p);
        assert_abs_diff_eq!(conse_embed(&m, &[0.0]).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodKind::ALL {
            assert_eq!(m.name().parse::<MethodKind>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("nope".parse::<MethodKind>().is_err());
    }

    #[test]
    fn predict_single_candidate_and_determinism() {
        let mut rng = seeded_rng(7);
        let classes = l2_normalize_rows(&gaussian_mat(4, 3, 1.0, &mut rng)).mat;
        let method = Method::Lm {
            map: gaussian_mat(2, 3, 1.0, &mut rng),
            classes,
        };
        let r = predict(&method, &[0.3, -1.0], &ids(&[2])).unwrap();
        assert_eq!(r.labels(), ids(&[2]));
        let all = ids(&[0, 1, 2, 3]);
        assert_eq!(
            predict(&method, &[0.3, -1.0], &all).unwrap(),
            predict(&method, &[0.3, -1.0], &all).unwrap()
        );
        assert!(predict(&method, &[0.3], &all).is_err());
    }

    proptest! {
        #[test]
        fn conse_probabilities_sum_to_one(seed in any::<u64>()) {
            let mut rng = seeded_rng(seed);
            let m = ConseModel {
                weights: gaussian_mat(4, 5, 3.0, &mut rng),
                classes: ids(&[0, 1, 2, 3, 4]),
                top_t: 5,
                semantics: Mat::identity(5, 5),
            };
            let x: Vec<f64> = gaussian_mat(1, 3, 2.0, &mut rng).iter().copied().collect();
            let p = m.probabilities(&x).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn restriction_gives_sub_ranking(seed in any::<u64>(), mask in 1u16..(1 << 10)) {
            let mut rng = seeded_rng(seed);
            let e = gaussian_mat(10, 3, 1.0, &mut rng);
            let p: Vec<f64> = gaussian_mat(1, 3, 1.0, &mut rng).iter().copied().collect();
            let full = rank_candidates(&p, &e, &ids(&(0..10).collect::<Vec<_>>())).unwrap();
            let subset: Vec<LabelId> = (0..10).filter(|i| mask & (1 << i) != 0).map(LabelId).collect();
            let sub = rank_candidates(&p, &e, &subset).unwrap();
            let induced: Vec<LabelId> = full.labels().into_iter().filter(|l| subset.contains(l)).collect();
            prop_assert_eq!(sub.labels(), induced);
        }

        #[test]
        fn unit_rows_distance_order_is_dot_order(seed in any::<u64>()) {
            let mut rng = seeded_rng(seed);
            let e = l2_normalize_rows(&gaussian_mat(8, 4, 1.0, &mut rng)).mat;
            let p: Vec<f64> = gaussian_mat(1, 4, 1.5, &mut rng).iter().copied().collect();
            let by_dist = rank_candidates(&p, &e, &ids(&(0..8).collect::<Vec<_>>())).unwrap();
            let dots: Vec<f64> = (0..8).map(|i| (0..4).map(|j| e[(i, j)] * p[j]).sum()).collect();
            let mut by_dot: Vec<usize> = (0..8).collect();
            by_dot.sort_by(|&a, &b| dots[b].total_cmp(&dots[a]));
            let gaps_ok = by_dot.windows(2).all(|w| (dots[w[0]] - dots[w[1]]).abs() > 1e-12);
            prop_assume!(gaps_ok);
            prop_assert_eq!(by_dist.labels(), ids(&by_dot));
        }

        #[test]
        fn conse_embed_in_convex_hull(seed in any::<u64>()) {
            let mut rng = seeded_rng(seed);
            let sem = gaussian_mat(6, 3, 1.0, &mut rng);
            let m = ConseModel {
                weights: gaussian_mat(3, 6, 2.0, &mut rng),
                classes: ids(&[0, 1, 2, 3, 4, 5]),
                top_t: 3,
                semantics: sem.clone(),
            };
            let x: Vec<f64> = gaussian_mat(1, 2, 1.0, &mut rng).iter().copied().collect();
            let p = m.probabilities(&x).unwrap();
            let top = top_indices(&p, 3);
            let total: f64 = top.iter().map(|&c| p[c]).sum();
            let weights: Vec<f64> = top.iter().map(|&c| p[c] / total).collect();
            prop_assert!(weights.iter().all(|w| *w >= 0.0));
            let mut rebuilt = DVector::zeros(3);
            for (&c, w) in top.iter().zip(&weights) {
                rebuilt += sem.row(c).transpose() * *w;
            }
            let e = conse_embed(&m, &x).unwrap();
            prop_assert!((e - rebuilt).norm() <= 1e-8);
        }
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let (x, labels) = two_blobs(9);
        let xb = with_bias(&x);
        let targets: Vec<usize> = labels.iter().map(|l| l.0).collect();
        let w = gaussian_mat(3, 2, 0.5, &mut seeded_rng(10));
        let (_, g) = softmax_loss(&w, &xb, &targets, 0.2);
        let fd = crate::math::finite_diff_grad(|w| softmax_loss(w, &xb, &targets, 0.2).0, &w, 1e-5)
            .unwrap();
        assert!(crate::math::relative_error(&g, &fd) <= 1e-6);
    }
}
