use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use roadrl_core::checkpoint::ParamFile;
use roadrl_core::eval::evaluate;
use roadrl_core::experts::{baseline_reward, generate_il_dataset, IlDataset};
use roadrl_core::policy::NetParams;
use roadrl_core::trainer::{il_pretrain, train as run_training, StartPoint, TrainMode, WorkerContext};
use roadrl_core::vehicle::response_net::{rise_time, StepComparison};
use roadrl_core::vehicle::{generate_response_log, train_deep_response, CommandSchedule, ACC_MAX, STEER_MAX};

use crate::config::RunConfig;

const GIT_HASH: &str = env!("ROADRL_GIT_HASH");

fn prepare_out(cfg: &RunConfig) -> anyhow::Result<&Path> {
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("config.toml"), cfg.to_toml()?)?;
    Ok(out)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, s)
}

#[derive(Serialize)]
struct RunMeta<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    git: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn write_meta<T: Serialize>(out: &Path, command: &str, cfg: &RunConfig, result: T) -> anyhow::Result<()> {
    write_json(
        &out.join(format!("{command}.run.json")),
        &RunMeta {
            command,
            seed: cfg.seed,
            git: GIT_HASH,
            config: cfg,
            result,
        },
    )
}

pub fn gen_dataset(cfg: &RunConfig) -> anyhow::Result<()> {
    let scenarios = cfg.training_scenarios()?;
    let out = prepare_out(cfg)?;
    let actuation = cfg.actuation.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ds = generate_il_dataset(
        &scenarios,
        cfg.dataset.episodes,
        &actuation,
        &cfg.episode,
        &cfg.expert,
        &cfg.dataset.noise,
        &mut rng,
    )?;
    ds.write(&out.join("dataset"))?;
    let kept = ds.episodes.len();
    write_meta(
        out,
        "gen-dataset",
        cfg,
        serde_json::json!({ "rows": ds.len(), "episodes_kept": kept, "episodes_requested": cfg.dataset.episodes }),
    )?;
    println!(
        "wrote {} rows from {kept} of {} episodes to {}",
        ds.len(),
        cfg.dataset.episodes,
        out.join("dataset").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ResponseResult {
    train_rmse: [f64; 2],
    holdout_rmse: [f64; 2],
    n_train: usize,
    n_holdout: usize,
    /// 10 to 90 % rise time of the steering step, s.
    steer_rise_time: RiseTimes,
    acc_rise_time: RiseTimes,
}

#[derive(Serialize)]
struct RiseTimes {
    low_pass: Option<f64>,
    deep_response: Option<f64>,
    plant: Option<f64>,
}

pub fn fit_response(cfg: &RunConfig) -> anyhow::Result<()> {
    let r = &cfg.response;
    let out = prepare_out(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = r.log_rows.unwrap_or(5000);
    let sched = CommandSchedule::random(rows, &mut rng);
    let log = generate_response_log(&r.plant, &sched, &mut rng)?;
    log.write(&out.join("response_log.csv"))?;
    let (net, report) = train_deep_response(&log, r.arch, &r.hyper)?;
    net.save(&out.join("response.ckpt"))?;

    let at = 5;
    let alpha = r.compare_alpha.unwrap_or(0.5);
    let cmp = StepComparison::run(&net, alpha, &r.plant, 60, at, 0.5 * ACC_MAX, STEER_MAX)?;
    write(&out.join("step_comparison.csv"), cmp.to_csv())?;
    let rt = |c: usize, k: usize| rise_time(&cmp.series[c][k], at - 1);
    let result = ResponseResult {
        train_rmse: report.train_rmse,
        holdout_rmse: report.holdout_rmse,
        n_train: report.n_train,
        n_holdout: report.n_holdout,
        steer_rise_time: RiseTimes {
            low_pass: rt(1, 1),
            deep_response: rt(1, 2),
            plant: rt(1, 3),
        },
        acc_rise_time: RiseTimes {
            low_pass: rt(0, 1),
            deep_response: rt(0, 2),
            plant: rt(0, 3),
        },
    };
    let mut loss = String::from("epoch,loss\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        writeln!(loss, "{},{l}", i + 1)?;
    }
    write(&out.join("fit_loss.csv"), loss)?;
    println!(
        "holdout rmse acc {:.4} steer {:.5}; checkpoint {}",
        result.holdout_rmse[0],
        result.holdout_rmse[1],
        out.join("response.ckpt").display()
    );
    write_meta(out, "fit-response", cfg, result)
}

fn load_dataset(dir: &Path) -> anyhow::Result<IlDataset> {
    IlDataset::read(dir).with_context(|| format!("reading IL dataset {}", dir.display()))
}

fn pretrain(cfg: &RunConfig, dataset: &Path, out: &Path) -> anyhow::Result<NetParams> {
    let ds = load_dataset(dataset)?;
    let p = &cfg.train;
    let init = NetParams::init(p.arch, &p.init, cfg.seed)?;
    let (params, report) = il_pretrain(&ds, init, &cfg.il)?;
    let path = out.join("il_policy.ckpt");
    params.save(&path)?;
    let mut csv = String::from("epoch,train_loss,holdout_loss\n");
    for (i, (t, h)) in report.train_loss.iter().zip(&report.holdout_loss).enumerate() {
        writeln!(csv, "{},{t},{h}", i + 1)?;
    }
    write(&out.join("il_loss.csv"), csv)?;
    write_json(&out.join("il_report.json"), &report)?;
    println!(
        "IL on {} rows: holdout rmse acc {:.4} steer {:.5}; checkpoint {}",
        report.n_train,
        report.holdout_rmse[0],
        report.holdout_rmse[1],
        path.display()
    );
    Ok(params)
}

pub fn pretrain_il(cfg: &RunConfig, dataset: Option<PathBuf>) -> anyhow::Result<()> {
    let dir = dataset.unwrap_or_else(|| cfg.out.join("dataset"));
    let out = prepare_out(cfg)?;
    pretrain(cfg, &dir, out)?;
    write_meta(out, "pretrain-il", cfg, serde_json::json!({ "dataset": dir }))
}

fn load_policy(cfg: &RunConfig, path: &Path) -> anyhow::Result<(NetParams, Option<roadrl_core::checkpoint::TrainingState>)> {
    let file = ParamFile::read(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let (p, state) = NetParams::from_param_file(file)?;
    if p.arch != cfg.train.arch {
        bail!(
            "checkpoint {} has architecture {:?}, config expects {:?}",
            path.display(),
            p.arch,
            cfg.train.arch
        );
    }
    Ok((p, state))
}

pub fn train(
    cfg: &RunConfig,
    mode: Option<TrainMode>,
    pretrained: Option<PathBuf>,
    resume: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mode = mode.unwrap_or(cfg.pipeline.mode);
    let pretrained = pretrained.or_else(|| cfg.pipeline.pretrained.clone());
    let scenarios = cfg.training_scenarios()?;
    let actuation = cfg.actuation.build()?;
    if mode == TrainMode::IlThenRl && resume.is_none() && pretrained.is_none() && cfg.pipeline.il_dataset.is_none() {
        bail!(
            "missing prerequisite: il_then_rl needs an IL dataset (pipeline.il_dataset) or a pretrained policy checkpoint (--pretrained / pipeline.pretrained)"
        );
    }
    let out = prepare_out(cfg)?;
    let start = if let Some(path) = &resume {
        let (params, state) = load_policy(cfg, path)?;
        let state = state.with_context(|| format!("{} holds no training state", path.display()))?;
        StartPoint::Resume { params, state }
    } else {
        match mode {
            TrainMode::PureRl => StartPoint::Fresh,
            TrainMode::IlThenRl => match &pretrained {
                Some(p) => StartPoint::Pretrained(load_policy(cfg, p)?.0),
                None => StartPoint::Pretrained(pretrain(cfg, cfg.pipeline.il_dataset.as_deref().unwrap(), out)?),
            },
        }
    };
    let ctx = WorkerContext {
        scenarios: &scenarios,
        actuation,
        episode: cfg.episode.clone(),
        train: cfg.train,
    };
    let ckpt_dir = out.join("checkpoints");
    let result = run_training(mode, &ctx, start, Some(&ckpt_dir))?;
    write(&out.join("curves.csv"), result.curves.to_csv())?;
    result
        .params
        .to_param_file(Some(result.state.clone()))
        .write(&out.join("final.ckpt"))?;
    let mut log = String::from("kind,version,episode,worker\n");
    for e in &result.log {
        let kind = match e.kind {
            roadrl_core::trainer::EventKind::Read => "read",
            roadrl_core::trainer::EventKind::Apply => "apply",
        };
        writeln!(log, "{kind},{},{},{}", e.version, e.episode, e.worker)?;
    }
    write(&out.join("update_log.csv"), log)?;
    let last = result.curves.rows.last().copied();
    println!(
        "{}: {} episodes applied, {} discarded, version {}{}",
        mode.name(),
        result.episodes.len(),
        result.discarded,
        result.version,
        last.map(|r| format!(", last window success {:.2}", r.window_success)).unwrap_or_default()
    );
    write_meta(
        out,
        "train",
        cfg,
        serde_json::json!({
            "mode": mode.name(),
            "resumed_from": resume,
            "pretrained": pretrained,
            "episodes_applied": result.episodes.len(),
            "discarded": result.discarded,
            "version": result.version,
            "first_90pct_window": result.curves.first_reaching(0.9),
        }),
    )
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, scenarios: Option<Vec<PathBuf>>) -> anyhow::Result<()> {
    let (params, _) = load_policy(cfg, checkpoint)?;
    let files = scenarios
        .or_else(|| cfg.eval.scenarios.clone())
        .unwrap_or_else(|| cfg.scenarios.clone());
    let scs = RunConfig::load_scenarios(&files)?;
    let actuation = cfg.actuation.build()?;
    let out = prepare_out(cfg)?;
    let report = evaluate(&params, &scs, cfg.eval.episodes, &actuation, &cfg.episode, cfg.seed)?;
    write_json(&out.join("eval.json"), &report.scenarios)?;
    write(&out.join("eval.csv"), report.to_csv())?;
    write(&out.join("trace.csv"), report.trace_csv())?;
    for s in &report.scenarios {
        println!(
            "{}: goal {}/{} off-road {} time-over {} |d| {:.3} acc-exceed {:.4} speed-ok {:.3}",
            s.scenario, s.goal_reached, s.episodes, s.off_road, s.time_over, s.mean_abs_d, s.acc_exceed_fraction, s.speed_compliance
        );
    }
    write_meta(out, "eval", cfg, serde_json::json!({ "checkpoint": checkpoint, "scenarios": files }))
}

pub fn baseline(cfg: &RunConfig) -> anyhow::Result<()> {
    let scenarios = cfg.training_scenarios()?;
    let actuation = cfg.actuation.build()?;
    let out = prepare_out(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = baseline_reward(&scenarios, cfg.baseline.episodes, &actuation, &cfg.episode, &cfg.expert, &mut rng)?;
    write_json(&out.join("baseline.json"), &r)?;
    write(
        &out.join("baseline.csv"),
        format!(
            "episodes,avg_r_acc,avg_r_sa,goal_rate\n{},{},{},{}\n",
            r.episodes, r.avg_r_acc, r.avg_r_sa, r.goal_rate
        ),
    )?;
    println!(
        "expert over {} episodes: avg R_acc {:.4}, avg R_sa {:.4}, goal rate {:.3}",
        r.episodes, r.avg_r_acc, r.avg_r_sa, r.goal_rate
    );
    write_meta(out, "baseline", cfg, r)
}
