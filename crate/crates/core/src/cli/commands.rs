use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::tables::{self, num, read_class_recall, read_hardness_csv, write_hardness_csv};
use super::*;
use crate::denoise::{cumulative_hardness, denoise_plan, DenoiseMode, MassTransform};
use crate::dynamics::{
    aggregate_ensemble, compute_aum, compute_el2n, compute_forgetting, parse_dynamics, DynamicsLog,
    EnsembleHardness, HardnessVector,
};
use crate::geometry::{
    build_knn, centroid_metrics, classify_distribution, dispersion_metrics, knn_metrics, FeatureSet, Level,
};
use crate::pruning::{clp_plan, dlp_plan, overlap, removal_histogram, PruneMode, PruningPlan};
use crate::resampling::{
    build_resampling_plan, resampling_targets, OversampleParams, ResamplingConfig,
};
use crate::stability::{ensemble_sweep, spearman_class_correlation, StabilityTask, SweepParams};
use crate::synthlab::{
    four_blob_spec, generate_blobs, stratified_holdout, train_ensemble, BlobSpec, TrainConfig,
};

pub(super) fn dispatch(cmd: &Command, run: &mut Run) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a, run),
        Command::TrainRef(a) => train_ref(a, run).map(drop),
        Command::Estimate(a) => estimate(a, run).map(drop),
        Command::Ratios(a) => ratios(a, run),
        Command::Resample(a) => resample(a, run),
        Command::Prune(a) => prune(a, run).map(drop),
        Command::Overlap(a) => overlap_cmd(a, run),
        Command::Stability(a) => stability(a, run).map(drop),
        Command::Denoise(a) => denoise(a, run).map(drop),
        Command::Metrics(a) => metrics(a, run),
        Command::Correlate(a) => correlate(a, run).map(drop),
        Command::Report(a) => report(a, run),
    }
}

fn load_features(run: &mut Run, path: &Path) -> Result<FeatureSet> {
    FeatureSet::load(run.input(path))
}

fn load_hardness(run: &mut Run, path: &Path, fs: &FeatureSet) -> Result<EnsembleHardness> {
    let eh = read_hardness_csv(run.input(path))?;
    if eh.values.len() != fs.n_samples() {
        return Err(HlabError::Incompatible(format!(
            "{} hardness values for {} samples",
            eh.values.len(),
            fs.n_samples()
        )));
    }
    Ok(eh)
}

fn write_json<T: Serialize>(run: &mut Run, name: &str, value: &T) -> Result<PathBuf> {
    run.write_text(name, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn model_hardness(log: &DynamicsLog, estimator: Estimator, probe: usize, mode: ForgettingMode) -> Result<HardnessVector> {
    match estimator {
        Estimator::Aum => compute_aum(log),
        Estimator::El2n => compute_el2n(log, probe),
        Estimator::Forgetting => compute_forgetting(log, mode),
    }
}

fn synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(run.input(p)).map_err(|e| HlabError::io(p, e))?;
            BlobSpec {
                seed: a.common.seed,
                ..serde_json::from_str(&text)?
            }
        }
        None => four_blob_spec(a.per_class, a.common.seed),
    };
    let fs = generate_blobs(&spec)?;
    let h = stratified_holdout(&fs)?;
    write_json(run, "blob_spec.json", &spec)?;
    fs.save(run.output("features.hfea"))?;
    h.train.save(run.output("train.hfea"))?;
    h.test.save(run.output("test.hfea"))?;
    let mut w = tables::writer(&run.output("split.csv"))?;
    w.write_record(["sample_id", "split", "split_index"])?;
    let mut rows: Vec<(usize, &str, usize)> = h
        .train_ids
        .iter()
        .enumerate()
        .map(|(j, &i)| (i, "train", j))
        .chain(h.test_ids.iter().enumerate().map(|(j, &i)| (i, "test", j)))
        .collect();
    rows.sort_unstable();
    for (i, s, j) in rows {
        w.write_record([i.to_string().as_str(), s, &j.to_string()])?;
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))
}

fn train_ref(a: &TrainArgs, run: &mut Run) -> Result<Vec<PathBuf>> {
    let train = load_features(run, &a.train)?;
    let eval = a.eval.as_ref().map(|p| load_features(run, p)).transpose()?;
    if a.models == 0 {
        return Err(HlabError::Parameter("--models must be at least 1".into()));
    }
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        momentum: a.momentum,
        weight_decay: a.weight_decay,
        batch_size: a.batch_size.min(train.n_samples()),
        lr_decay_epochs: a.decay_epochs.clone(),
        lr_decay_factor: a.decay_factor,
        seed: a.common.seed,
    };
    let results = train_ensemble(&train, &cfg, a.models, eval.as_ref())?;
    let k = train.k_classes();
    let mut paths = Vec::new();
    let mut w = tables::writer(&run.output("eval_metrics.csv"))?;
    w.write_record(["model", "split", "class_id", "precision", "recall", "precision_undefined"])?;
    for (m, r) in results.iter().enumerate() {
        let path = run.output(&format!("model_{m}.hdyn"));
        r.log.save(&path)?;
        paths.push(path);
        let reports = std::iter::once(("train", &r.train_report)).chain(r.eval_report.as_ref().map(|e| ("eval", e)));
        for (split, rep) in reports {
            for c in 0..k {
                w.write_record([
                    m.to_string().as_str(),
                    split,
                    &c.to_string(),
                    &num(rep.precision[c]),
                    &num(rep.recall[c]),
                    &rep.precision_undefined[c].to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    let mut w = tables::writer(&run.output("class_recall.csv"))?;
    w.write_record(["class_id", "recall", "precision"])?;
    for c in 0..k {
        let pick = |f: &dyn Fn(&crate::synthlab::ClassReport) -> f64| {
            results
                .iter()
                .map(|r| f(r.eval_report.as_ref().unwrap_or(&r.train_report)))
                .sum::<f64>()
                / results.len() as f64
        };
        let recall = pick(&|rep| rep.recall[c]);
        let precision = pick(&|rep| rep.precision[c]);
        w.write_record([c.to_string(), num(recall), num(precision)])?;
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    Ok(paths)
}

fn estimate(a: &EstimateArgs, run: &mut Run) -> Result<PathBuf> {
    let per_model = a
        .dynamics
        .iter()
        .map(|p| model_hardness(&parse_dynamics(run.input(p))?, a.estimator, a.probe_epoch, a.forgetting_mode))
        .collect::<Result<Vec<_>>>()?;
    let eh = aggregate_ensemble(&per_model)?;
    let name = a
        .output
        .clone()
        .unwrap_or_else(|| format!("hardness_{}.csv", a.estimator));
    let path = run.output(&name);
    write_hardness_csv(&path, &eh)?;
    Ok(path)
}

fn ratios(a: &RatiosArgs, run: &mut Run) -> Result<()> {
    let fs = load_features(run, &a.features)?;
    let eh = load_hardness(run, &a.hardness, &fs)?;
    let (ch, base, scaled, counts) = resampling_targets(&eh, fs.labels(), fs.k_classes(), a.alpha)?;
    let sizes = fs.class_sizes();
    let mut w = tables::writer(&run.output("ratios.csv"))?;
    w.write_record(["class_id", "class_size", "class_hardness", "base_ratio", "scaled_ratio", "target_count"])?;
    for c in 0..fs.k_classes() {
        w.write_record([
            c.to_string(),
            sizes[c].to_string(),
            num(ch.values[c]),
            num(base.values[c]),
            num(scaled.values[c]),
            counts.values[c].to_string(),
        ])?;
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))
}

fn resample(a: &ResampleArgs, run: &mut Run) -> Result<()> {
    let fs = load_features(run, &a.features)?;
    let eh = load_hardness(run, &a.hardness, &fs)?;
    let cfg = ResamplingConfig {
        alpha: a.alpha,
        strategy: a.strategy,
        mode: a.mode,
        seed: a.common.seed,
        oversample: OversampleParams {
            beta: a.beta,
            smote_neighbors: a.smote_neighbors,
        },
    };
    let plan = build_resampling_plan(&eh, fs.labels(), fs.k_classes(), Some(&fs), &cfg)?;
    run.write_text("resample_plan.json", &(plan.to_json()? + "\n"))?;
    if a.materialize {
        plan.materialize(&fs)?.save(run.output("resampled.hfea"))?;
    }
    Ok(())
}

fn rate_tag(rate: f64) -> String {
    format!("{rate}")
}

fn prune(a: &PruneArgs, run: &mut Run) -> Result<Vec<PruningPlan>> {
    let fs = load_features(run, &a.features)?;
    let eh = load_hardness(run, &a.hardness, &fs)?;
    let mut plans = Vec::new();
    for &rate in &a.rate {
        let plan = match a.mode {
            PruneMode::Dlp => dlp_plan(&eh, fs.labels(), rate)?,
            PruneMode::Clp => clp_plan(&eh, fs.labels(), fs.k_classes(), rate)?,
        };
        run.write_text(&format!("prune_{}_{}.json", a.mode, rate_tag(rate)), &(plan.to_json()? + "\n"))?;
        plans.push(plan);
    }
    let mut w = tables::writer(&run.output(&format!("prune_{}_histogram.csv", a.mode)))?;
    w.write_record(["rate", "class_id", "class_size", "removed", "removed_fraction"])?;
    for plan in &plans {
        for row in removal_histogram(plan, fs.labels(), fs.k_classes()) {
            w.write_record([
                num(row.rate),
                row.class_id.to_string(),
                row.class_size.to_string(),
                row.removed.to_string(),
                num(row.removed_fraction),
            ])?;
        }
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    Ok(plans)
}

fn read_plan(run: &mut Run, path: &Path) -> Result<PruningPlan> {
    let text = std::fs::read_to_string(run.input(path)).map_err(|e| HlabError::io(path, e))?;
    PruningPlan::from_json(&text)
}

fn overlap_cmd(a: &OverlapArgs, run: &mut Run) -> Result<()> {
    let pa = read_plan(run, &a.a)?;
    let pb = read_plan(run, &a.b)?;
    let o = overlap(&pa, &pb)?;
    write_json(
        run,
        "overlap.json",
        &json!({
            "a": { "mode": pa.mode, "rate": pa.rate, "size": pa.len() },
            "b": { "mode": pb.mode, "rate": pb.rate, "size": pb.len() },
            "intersection": o.intersection,
            "a_in_b": o.a_in_b,
            "b_in_a": o.b_in_a,
        }),
    )?;
    Ok(())
}

fn stability(a: &StabilityArgs, run: &mut Run) -> Result<Option<usize>> {
    let fs = load_features(run, &a.features)?;
    let per_model = a
        .dynamics
        .iter()
        .map(|p| {
            let hv = model_hardness(&parse_dynamics(run.input(p))?, a.estimator, a.probe_epoch, ForgettingMode::EventCount)?;
            if hv.values.len() != fs.n_samples() {
                return Err(HlabError::Incompatible(format!(
                    "{} logs {} samples, features have {}",
                    p.display(),
                    hv.values.len(),
                    fs.n_samples()
                )));
            }
            Ok(hv)
        })
        .collect::<Result<Vec<_>>>()?;
    let class_accuracy = match (&a.eval_metrics, a.task) {
        (Some(p), _) => Some(tables::read_model_recall(run.input(p))?),
        (None, StabilityTask::ClassAccuracy) => {
            return Err(HlabError::Parameter("class-accuracy task needs --eval-metrics".into()))
        }
        (None, _) => None,
    };
    let params = SweepParams {
        alpha: a.alpha,
        rates: a.rates.clone(),
        class_accuracy,
    };
    let curve = ensemble_sweep(&per_model, fs.labels(), fs.k_classes(), a.task, &params)?;
    let mut w = tables::writer(&run.output("stability.csv"))?;
    w.write_record(["j", "metric", "class_or_rate", "value"])?;
    for (j, metric, key, value) in curve.rows() {
        w.write_record([j.to_string().as_str(), metric, key, &num(value)])?;
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    let recommended = a.threshold.and_then(|t| curve.recommended_size(|_| t));
    write_json(
        run,
        "stability_summary.json",
        &json!({
            "task": a.task,
            "estimator": a.estimator,
            "n_models": curve.x.len() + 1,
            "threshold": a.threshold,
            "recommended_ensemble_size": recommended,
        }),
    )?;
    Ok(recommended)
}

fn denoise(a: &DenoiseArgs, run: &mut Run) -> Result<usize> {
    let fs = load_features(run, &a.features)?;
    let eh = load_hardness(run, &a.hardness, &fs)?;
    let plan = denoise_plan(&eh, fs.labels(), fs.k_classes(), a.mode, a.fraction, a.transform)?;
    run.write_text("denoise_plan.json", &(plan.to_json()? + "\n"))?;
    let sizes = fs.class_sizes();
    let mut w = tables::writer(&run.output("denoise_histogram.csv"))?;
    w.write_record(["class_id", "class_size", "removed", "removed_fraction"])?;
    for (c, (&size, &removed)) in sizes.iter().zip(&plan.per_class_removed).enumerate() {
        w.write_record([
            c.to_string(),
            size.to_string(),
            removed.to_string(),
            num(removed as f64 / size.max(1) as f64),
        ])?;
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    if a.mode == DenoiseMode::Elbow {
        let curve = cumulative_hardness(&eh, a.transform)?;
        let mut w = tables::writer(&run.output("cumulative_hardness.csv"))?;
        w.write_record(["rank", "sample_id", "cumulative"])?;
        for (r, (&id, &y)) in curve.order.iter().zip(&curve.y).enumerate() {
            w.write_record([(r + 1).to_string(), id.to_string(), num(y)])?;
        }
        w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    }
    Ok(plan.len())
}

fn metrics(a: &MetricsArgs, run: &mut Run) -> Result<()> {
    let fs = load_features(run, &a.features)?;
    let nt = build_knn(&fs, a.k)?;
    let cm = centroid_metrics(&fs)?;
    let km = knn_metrics(&fs, &nt)?;
    let dm = dispersion_metrics(&fs)?;
    let mut instance: Vec<_> = cm.tables().into_iter().chain(km.tables()).collect();
    instance.sort_by_key(|t| t.metric);
    let mut w = tables::writer(&run.output("metrics.csv"))?;
    w.write_record(["sample_id", "metric", "value"])?;
    for i in 0..fs.n_samples() {
        for t in &instance {
            w.write_record([i.to_string().as_str(), t.metric.name(), &num(t.values[i])])?;
        }
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    let mut w = tables::writer(&run.output("class_metrics.csv"))?;
    w.write_record(["class_id", "metric", "value"])?;
    for c in 0..fs.k_classes() {
        for t in [&dm.volume, &dm.max_lambda, &dm.avg_lambda] {
            debug_assert_eq!(t.level, Level::Class);
            w.write_record([c.to_string().as_str(), t.metric.name(), &num(t.values[c])])?;
        }
    }
    w.flush().map_err(|e| HlabError::io(&run.out_dir, e))?;
    let mut families = serde_json::Map::new();
    for t in &instance {
        let entry = match classify_distribution(&t.values) {
            Ok(rep) => serde_json::to_value(rep)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
        families.insert(t.metric.name().to_string(), entry);
    }
    write_json(run, "families.json", &families)?;
    Ok(())
}

#[derive(Serialize)]
struct Correlation {
    estimator: Estimator,
    class_hardness: Vec<f64>,
    class_recall: Vec<f64>,
    rho: f64,
    p_value: f64,
    exact: bool,
    hardest_class: usize,
    lowest_recall_class: usize,
}

fn correlate(a: &CorrelateArgs, run: &mut Run) -> Result<Correlation> {
    let fs = load_features(run, &a.features)?;
    let eh = load_hardness(run, &a.hardness, &fs)?;
    let recall = read_class_recall(run.input(&a.recall))?;
    if recall.len() != fs.k_classes() {
        return Err(HlabError::Incompatible(format!(
            "{} recall values for {} classes",
            recall.len(),
            fs.k_classes()
        )));
    }
    let ch = crate::resampling::class_hardness(&eh, fs.labels(), fs.k_classes())?;
    let sp = spearman_class_correlation(&ch, &recall)?;
    let hardest_class = crate::resampling::classes_by_hardness(&ch)[0];
    let lowest_recall_class = (0..recall.len())
        .min_by(|&x, &y| recall[x].total_cmp(&recall[y]).then(x.cmp(&y)))
        .expect("at least one class");
    let out = Correlation {
        estimator: eh.estimator,
        class_hardness: ch.values,
        class_recall: recall,
        rho: sp.rho,
        p_value: sp.p_value,
        exact: sp.exact,
        hardest_class,
        lowest_recall_class,
    };
    write_json(run, "spearman.json", &out)?;
    Ok(out)
}

fn report(a: &ReportArgs, run: &mut Run) -> Result<()> {
    let common = a.common.clone();
    let dir = common.out_dir.clone();
    synth(
        &SynthArgs {
            common: common.clone(),
            per_class: a.per_class,
            spec: None,
        },
        run,
    )?;
    let train = dir.join("train.hfea");
    let test = dir.join("test.hfea");
    let models = train_ref(
        &TrainArgs {
            common: common.clone(),
            train: train.clone(),
            eval: Some(test),
            models: a.models,
            epochs: a.epochs,
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 128,
            decay_epochs: vec![60, 120, 160],
            decay_factor: 0.2,
        },
        run,
    )?;
    let hardness = estimate(
        &EstimateArgs {
            common: common.clone(),
            estimator: a.estimator,
            dynamics: models.clone(),
            probe_epoch: 20.min(a.epochs - 1),
            forgetting_mode: ForgettingMode::EventCount,
            output: None,
        },
        run,
    )?;
    ratios(
        &RatiosArgs {
            common: common.clone(),
            hardness: hardness.clone(),
            features: train.clone(),
            alpha: a.alpha,
        },
        run,
    )?;
    resample(
        &ResampleArgs {
            common: common.clone(),
            hardness: hardness.clone(),
            features: train.clone(),
            alpha: a.alpha,
            strategy: a.strategy,
            mode: crate::resampling::ResampleMode::Full,
            beta: crate::resampling::DEFAULT_BETA,
            smote_neighbors: crate::resampling::SMOTE_NEIGHBORS,
            materialize: false,
        },
        run,
    )?;
    let mut plans = Vec::new();
    for mode in [PruneMode::Dlp, PruneMode::Clp] {
        plans.push(prune(
            &PruneArgs {
                common: common.clone(),
                hardness: hardness.clone(),
                features: train.clone(),
                mode,
                rate: a.rates.clone(),
            },
            run,
        )?);
    }
    let mut w = tables::writer(&run.output("prune_overlap.csv"))?;
    w.write_record(["rate", "intersection", "dlp_in_clp", "clp_in_dlp"])?;
    for (d, c) in plans[0].iter().zip(&plans[1]) {
        match overlap(d, c) {
            Ok(o) => w.write_record([num(d.rate), o.intersection.to_string(), num(o.a_in_b), num(o.b_in_a)])?,
            Err(e) => log::warn!("overlap at rate {}: {e}", d.rate),
        }
    }
    w.flush().map_err(|e| HlabError::io(&dir, e))?;
    let recommended = if models.len() >= 2 {
        stability(
            &StabilityArgs {
                common: common.clone(),
                task: StabilityTask::PruningIndices,
                estimator: a.estimator,
                dynamics: models.clone(),
                features: train.clone(),
                alpha: a.alpha,
                rates: a.rates.clone(),
                eval_metrics: None,
                probe_epoch: 20.min(a.epochs - 1),
                threshold: Some(5.0),
            },
            run,
        )?
    } else {
        None
    };
    let denoised = match denoise(
        &DenoiseArgs {
            common: common.clone(),
            hardness: hardness.clone(),
            features: train.clone(),
            mode: DenoiseMode::Elbow,
            fraction: None,
            transform: MassTransform::Shifted,
        },
        run,
    ) {
        Ok(n) => json!(n),
        Err(e) => json!({ "error": e.to_string() }),
    };
    metrics(
        &MetricsArgs {
            common: common.clone(),
            features: train.clone(),
            k: a.k,
        },
        run,
    )?;
    let corr = correlate(
        &CorrelateArgs {
            common,
            hardness,
            features: train,
            recall: dir.join("class_recall.csv"),
        },
        run,
    )?;
    write_json(
        run,
        "report.json",
        &json!({
            "estimator": a.estimator,
            "models": a.models,
            "class_hardness": corr.class_hardness,
            "class_recall": corr.class_recall,
            "hardest_class": corr.hardest_class,
            "lowest_recall_class": corr.lowest_recall_class,
            "spearman_rho": corr.rho,
            "spearman_p": corr.p_value,
            "pruning_stability_recommended_size": recommended,
            "elbow_removed": denoised,
        }),
    )?;
    Ok(())
}
