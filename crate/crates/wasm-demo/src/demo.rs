use serde::Serialize;

use propnsm::data::make_split;
use propnsm::eval::{run_binary_pairs, EvalOptions, Learner, ProtocolConfig, ProtocolKind};
use propnsm::math::{l2_normalize_rows, to_rows, Mat};
use propnsm::nsm::map_point;
use propnsm::synth::{generate, SynthConfig, SynthData};
use propnsm::{Error, MethodKind, ModelSettings, Result, ZeroShotTask};

const MAX_TRIALS: usize = 50;

#[derive(Debug, Serialize)]
pub struct PropertyFitView {
    pub labels: Vec<String>,
    pub unseen: Vec<String>,
    /// Seen-label semantic similarities.
    pub semantic_gram: Vec<Vec<f64>>,
    /// Similarities of the fitted, unnormalized seen property vectors.
    pub property_gram: Vec<Vec<f64>>,
    pub trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct MethodScore {
    pub method: String,
    pub accuracy: f64,
    pub per_trial: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct TrialsView {
    pub trials: usize,
    pub methods: Vec<MethodScore>,
}

#[derive(Debug, Serialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
    pub class: usize,
    pub unseen: bool,
}

#[derive(Debug, Serialize)]
pub struct PlaneView {
    pub labels: Vec<String>,
    pub unseen: Vec<usize>,
    /// Unit property vector of each class.
    pub classes: Vec<[f64; 2]>,
    pub points: Vec<PlanePoint>,
    pub accuracy: f64,
}

fn synth(semantic_noise: f64) -> Result<(SynthData, Mat)> {
    let data = generate(&SynthConfig {
        semantic_noise,
        ..Default::default()
    })?;
    let sem = data.dataset.class_semantics(&data.table)?;
    Ok((data, sem))
}

fn gram(m: &Mat) -> Vec<Vec<f64>> {
    to_rows(&(m * m.transpose()))
}

pub fn property_fit(
    alpha: f64,
    lambda_w: f64,
    n_prime: usize,
    seed: u64,
) -> Result<PropertyFitView> {
    let (data, sem) = synth(0.1)?;
    let split = make_split(&data.dataset, 2, seed)?;
    let mut settings = ModelSettings::default();
    settings.property.alpha = alpha;
    settings.property.lambda_w = lambda_w;
    settings.property.n_prime = n_prime;
    settings.property.gd.max_iters = 500;
    let task = ZeroShotTask::new(&data.dataset, &sem, &split, &settings, seed, false)?;
    let fit = task.property_fit()?;
    let mut l_s = Mat::zeros(task.seen().len(), sem.ncols());
    for (r, id) in task.seen().iter().enumerate() {
        l_s.row_mut(r).copy_from(&task.semantics().row(id.0));
    }
    let names = |ids: &[propnsm::LabelId]| data.dataset.classes.names(ids);
    Ok(PropertyFitView {
        labels: names(task.seen()),
        unseen: names(task.unseen()),
        semantic_gram: gram(&l_s),
        property_gram: gram(&fit.raw.b_s),
        trace: fit.trace.clone(),
    })
}

pub fn zero_shot_trials(semantic_noise: f64, trials: usize, seed: u64) -> Result<TrialsView> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "trials must be in 1..={MAX_TRIALS}"
        )));
    }
    let (data, sem) = synth(semantic_noise)?;
    let learners: [&dyn Learner; 3] = [&MethodKind::NsmPb, &MethodKind::LmPb, &MethodKind::Lm];
    let mut options = EvalOptions::default();
    options.settings.property.gd.max_iters = 500;
    options.settings.nsm.gd.max_iters = 300;
    let cfg = ProtocolConfig {
        kind: ProtocolKind::BinaryPairs,
        trials,
        master_seed: seed,
        ..Default::default()
    };
    let report = run_binary_pairs(&data.dataset, &sem, &learners, &cfg, &options)?;
    let methods = report
        .methods
        .iter()
        .map(|m| MethodScore {
            method: m.clone(),
            accuracy: report.mean(m, "accuracy").unwrap_or(f64::NAN),
            per_trial: report.values(m, "accuracy"),
        })
        .collect();
    Ok(TrialsView { trials, methods })
}

pub fn property_plane(alpha: f64, lambda_v: f64, seed: u64) -> Result<PlaneView> {
    let (data, sem) = synth(0.1)?;
    let split = make_split(&data.dataset, 3, seed)?;
    let mut settings = ModelSettings::default();
    settings.property.alpha = alpha;
    settings.property.n_prime = 2;
    settings.nsm.lambda_v = lambda_v;
    let task = ZeroShotTask::new(&data.dataset, &sem, &split, &settings, seed, false)?;
    let classes = task.property_classes()?;
    let v = task.fit_nsm_against(&classes)?.model.v;
    let all: Vec<propnsm::LabelId> = data.dataset.classes.ids().collect();
    let mut hits = 0usize;
    let mut tests = 0usize;
    let candidates: Vec<propnsm::LabelId> = split.unseen.iter().copied().collect();
    let points = data
        .dataset
        .instances
        .iter()
        .map(|inst| {
            let p = map_point(&inst.features, &v);
            let unseen = split.unseen.contains(&inst.label);
            if unseen {
                let ranking =
                    propnsm::classifiers::rank_candidates(p.as_slice(), &classes, &candidates)?;
                hits += usize::from(ranking.top() == Some(inst.label));
                tests += 1;
            }
            Ok(PlanePoint {
                x: p[0],
                y: p[1],
                class: inst.label.0,
                unseen,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let unit = l2_normalize_rows(&classes).mat;
    Ok(PlaneView {
        labels: data.dataset.classes.names(&all),
        unseen: split.unseen.iter().map(|id| id.0).collect(),
        classes: (0..unit.nrows())
            .map(|r| [unit[(r, 0)], unit[(r, 1)]])
            .collect(),
        points,
        accuracy: hits as f64 / tests.max(1) as f64,
    })
}
