//! Acceptance suite. Runs every criterion in sequence, prints one line per
//! criterion and exits non-zero if any failed or overran its time budget.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tscbench::agent::{build_agents, run_training, EpisodeLog};
use tscbench::bench::{cmd_run, run_classical_episode, run_experiment, AgentKind, ExperimentConfig, Scenario};
use tscbench::controllers::{max_pressure_action, Classical, FixedTimeConfig, MaxPressureConfig};
use tscbench::env::{EnvConfig, RewardName, TscEnv};
use tscbench::fixtures::{self, DemandProfile, PhasePlan};
use tscbench::format::{
    convert, convert_model, load_flows, load_network, save_flows, save_network, ConversionOptions, FormatKind,
};
use tscbench::metrics::approx_delay;
use tscbench::model::RouteKind;
use tscbench::sim::{Engine, SimConfig};

const KINDS: [FormatKind; 2] = [FormatKind::CityflowStyleJson, FormatKind::SumoStyleXml];

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn delay_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.gen_range(1..=60);
        let v_max = rng.gen_range(0.5..30.0);
        let speeds: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=v_max)).collect();
        let mut sum = 0.0;
        for s in &speeds {
            sum += s;
        }
        let expected = 1.0 - sum / (n as f64 * v_max);
        let got = approx_delay(&speeds, v_max).ok_or(format!("case {case}: no value"))?;
        worst = worst.max((got - expected).abs());
    }
    ensure(worst <= 1e-12, || format!("max abs error {worst:e}"))?;
    ensure(approx_delay(&[], 10.0).is_none(), || "empty lane produced a value".into())?;
    Ok(format!("max abs error {worst:e}"))
}

fn round_trip_pair(net_text: [&[u8]; 2], flow_text: [&[u8]; 2], label: &str) -> Result<(), String> {
    let opts = ConversionOptions::default();
    for (k, kind) in KINDS.into_iter().enumerate() {
        let net = load_network(kind, net_text[k]).map_err(|e| format!("{label} {kind}: {e}"))?;
        let flows = load_flows(kind, flow_text[k]).map_err(|e| format!("{label} {kind}: {e}"))?;
        let net2 = load_network(kind, &save_network(kind, &net).unwrap()).unwrap();
        let flows2 = load_flows(kind, &save_flows(kind, &flows).unwrap()).unwrap();
        ensure(net2 == net, || format!("{label}: network changed through {kind}"))?;
        ensure(flows2 == flows, || format!("{label}: flows changed through {kind}"))?;
        let other = KINDS[1 - k];
        let (n_b, f_b) = convert(net_text[k], flow_text[k], kind, other, &opts).map_err(|e| e.to_string())?;
        let (n_a, f_a) = convert(&n_b, &f_b, other, kind, &opts).map_err(|e| e.to_string())?;
        let (net3, flows3) = convert_model(&n_a, &f_a, kind, &opts).map_err(|e| e.to_string())?;
        ensure(net3 == net, || format!("{label}: graph differs after {kind}->{other}->{kind}"))?;
        ensure(flows3 == flows.sorted_by_departure(), || {
            format!("{label}: flows differ after {kind}->{other}->{kind}")
        })?;
    }
    Ok(())
}

fn converter_round_trip() -> Outcome {
    let dir = manifest().join("fixtures");
    let read = |name: String| std::fs::read(dir.join(name)).map_err(|e| e.to_string());
    for name in fixtures::SCENARIOS {
        let nets = [
            read(format!("{name}.{}", KINDS[0].network_extension()))?,
            read(format!("{name}.{}", KINDS[1].network_extension()))?,
        ];
        let flows = [
            read(format!("{name}.{}", KINDS[0].flow_extension()))?,
            read(format!("{name}.{}", KINDS[1].flow_extension()))?,
        ];
        round_trip_pair([&nets[0], &nets[1]], [&flows[0], &flows[1]], name)?;
    }
    for seed in 0..50 {
        let net = common::random_network(seed);
        let flows = common::random_flows(seed, &net);
        let nets = KINDS.map(|k| save_network(k, &net).unwrap());
        let fl = KINDS.map(|k| save_flows(k, &flows).unwrap());
        round_trip_pair([&nets[0], &nets[1]], [&fl[0], &fl[1]], &format!("random seed {seed}"))?;
        let back = load_network(KINDS[0], &nets[0]).unwrap();
        ensure(back == net, || format!("random seed {seed}: not the generated network"))?;
    }
    Ok(format!("{} fixtures + 50 random networks", fixtures::SCENARIOS.len()))
}

/// Removes the signal program of junction `id` from a sumo-style network.
fn unsignalize(text: &str, id: &str) -> String {
    let open = format!("<tlLogic id=\"{id}\"");
    let start = text.find(&open).expect("program present");
    let end = start + text[start..].find("</tlLogic>").expect("closed") + "</tlLogic>".len();
    let mut out = format!("{}{}", &text[..start], &text[end..]);
    let attr = format!(" tl=\"{id}\" linkIndex=\"");
    while let Some(at) = out.find(&attr) {
        let close = at + attr.len() + out[at + attr.len()..].find('"').unwrap() + 1;
        out.replace_range(at..close, "");
    }
    out
}

fn calibration() -> Outcome {
    let dir = manifest().join("fixtures");
    let net_xml = std::fs::read(dir.join("grid4x4.net.xml")).map_err(|e| e.to_string())?;
    let od_xml = std::fs::read(dir.join("grid4x4_od.rou.xml")).map_err(|e| e.to_string())?;
    let opts = ConversionOptions {
        yellow_time_override: Some(4.0),
        ..ConversionOptions::default()
    };

    // route completion
    let od = load_flows(FormatKind::SumoStyleXml, &od_xml).map_err(|e| e.to_string())?;
    ensure(od.flows.iter().all(|f| f.is_incomplete()), || "fixture is not O-D only".into())?;
    let (n_json, f_json) = convert(&net_xml, &od_xml, FormatKind::SumoStyleXml, FormatKind::CityflowStyleJson, &opts)
        .map_err(|e| e.to_string())?;
    let net = load_network(FormatKind::CityflowStyleJson, &n_json).unwrap();
    let done = load_flows(FormatKind::CityflowStyleJson, &f_json).unwrap();
    for f in &done.flows {
        ensure(f.route_kind == RouteKind::Full, || "route left incomplete".into())?;
        let (from, to) = (&f.route[0], f.route.last().unwrap());
        let oracle = common::oracle_path(&net, from, to).ok_or(format!("oracle found no path {from} -> {to}"))?;
        ensure(f.route == oracle, || format!("{from} -> {to}: {:?} != oracle {:?}", f.route, oracle))?;
    }
    Engine::new(&net, &done, SimConfig::default()).map_err(|e| format!("completed routes not drivable: {e}"))?;

    // equal yellow intervals
    ensure(
        net.intersections().iter().filter(|i| !i.is_virtual).all(|i| i.yellow_time == 4.0),
        || "yellow override not applied everywhere".into(),
    )?;

    // unsignalized junctions become virtual and stay passable
    let arterial = std::fs::read_to_string(dir.join("arterial1x3.net.xml")).unwrap();
    let middle = fixtures::intersection_id(2, 1);
    let stripped = unsignalize(&arterial, &middle);
    let flows_xml = std::fs::read(dir.join("arterial1x3.rou.xml")).unwrap();
    let (anet, aflows) = convert_model(stripped.as_bytes(), &flows_xml, FormatKind::SumoStyleXml, &opts)
        .map_err(|e| e.to_string())?;
    let inter = anet.intersection(&middle).ok_or("junction lost")?;
    ensure(inter.is_virtual && inter.phases.is_empty(), || format!("{middle} is not virtual"))?;
    let mut e = Engine::new(&anet, &aflows, SimConfig::default()).map_err(|e| e.to_string())?;
    while !e.is_finished() {
        e.step().unwrap();
    }
    ensure(!e.finished().is_empty(), || "no vehicle crossed the network".into())?;

    // departure-sorted sumo output
    let (_, flows) = fixtures::scenario("grid4x4").unwrap();
    let mut shuffled = flows.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for f in &mut shuffled.flows {
        f.start_time = rng.gen_range(0..600) as f64;
    }
    shuffled.flows.reverse();
    let (_, f_xml) = convert(
        &save_network(FormatKind::CityflowStyleJson, &fixtures::grid(4, 4, PhasePlan::Eight)).unwrap(),
        &save_flows(FormatKind::CityflowStyleJson, &shuffled).unwrap(),
        FormatKind::CityflowStyleJson,
        FormatKind::SumoStyleXml,
        &ConversionOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let emitted = load_flows(FormatKind::SumoStyleXml, &f_xml).unwrap();
    ensure(emitted.is_sorted_by_departure(), || "sumo flows not departure-sorted".into())?;
    ensure(emitted.flows.len() == shuffled.flows.len(), || "flows lost".into())?;
    Ok(format!("{} completed routes match the oracle", done.flows.len()))
}

fn engine_safety() -> Outcome {
    let net = fixtures::grid(4, 4, PhasePlan::Eight);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let profile = DemandProfile {
        east_west_straight: rng.gen_range(4.0..10.0),
        north_south_straight: rng.gen_range(4.0..10.0),
        turning: rng.gen_range(15.0..40.0),
        end_time: 10_000.0,
    };
    let flows = fixtures::demand(4, 4, profile, 4);
    let cfg = SimConfig {
        horizon: 10_000.0,
        seed: 4,
        ..SimConfig::default()
    };
    let mut e = Engine::new(&net, &flows, cfg).map_err(|e| e.to_string())?;
    let signalized = e.topology().signalized.clone();
    let mut ticks = 0;
    while !e.is_finished() {
        for &i in &signalized {
            if rng.gen_bool(0.1) {
                e.set_phase(i, rng.gen_range(0..8)).unwrap();
            }
        }
        e.step().map_err(|e| e.to_string())?;
        ticks += 1;
        common::check_engine(&e)?;
    }
    ensure(ticks == 10_000, || format!("{ticks} ticks"))?;
    Ok(format!(
        "{ticks} ticks, {} spawned, {} finished",
        e.total_spawned(),
        e.finished().len()
    ))
}

/// `episodes.csv` without the wall-clock column, plus `summary.json`.
fn run_log(dir: &Path) -> Result<String, String> {
    let csv = std::fs::read_to_string(dir.join("episodes.csv")).map_err(|e| e.to_string())?;
    let mut out: String = csv
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n");
    out.push_str(&std::fs::read_to_string(dir.join("summary.json")).map_err(|e| e.to_string())?);
    Ok(out)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for agent in AgentKind::ALL {
        let config = manifest().join("configs").join(format!("{}.toml", agent.name()));
        let mut logs = Vec::new();
        for run in ["a", "b"] {
            let out = tmp.path().join(format!("{}-{run}", agent.name()));
            cmd_run(&config, Some(7), Some(&out)).map_err(|e| format!("{}: {e}", agent.name()))?;
            logs.push(run_log(&out)?);
        }
        ensure(logs[0] == logs[1], || format!("{}: logs differ", agent.name()))?;
    }
    Ok(format!("{} agents", AgentKind::ALL.len()))
}

fn max_pressure_oracle() -> Outcome {
    let cfg = MaxPressureConfig::default();
    for seed in 0..1000 {
        let (net, s, i) = common::random_state(seed);
        let got = max_pressure_action(&s, i, cfg.t_min, &cfg).map_err(|e| e.to_string())?;
        let want = common::oracle_max_pressure(&net, &s, i);
        ensure(got == want, || format!("state {seed}: controller {got}, oracle {want}"))?;
    }
    Ok("1000 states".into())
}

fn classical_travel_time(scenario: &Scenario, controller: Classical) -> Result<f64, String> {
    let mut env =
        TscEnv::new(&scenario.network, &scenario.flows, EnvConfig::default()).map_err(|e| e.to_string())?;
    Ok(run_classical_episode(&mut env, &controller).map_err(|e| e.to_string())?.travel_time)
}

fn ordering() -> Outcome {
    let mut detail = Vec::new();
    for (name, rows, cols) in [("1x1", 1, 1), ("1x3", 1, 3)] {
        for seed in 1..=3 {
            let scenario = Scenario {
                network: fixtures::grid(rows, cols, PhasePlan::Eight),
                flows: fixtures::demand(rows, cols, DemandProfile::asymmetric(), seed),
            };
            let ft = classical_travel_time(&scenario, Classical::FixedTime(FixedTimeConfig { t_fixed: 30.0 }))?;
            let mp = classical_travel_time(&scenario, Classical::MaxPressure(MaxPressureConfig::default()))?;
            ensure(mp < ft, || format!("{name} seed {seed}: MaxPressure {mp:.1} >= FixedTime {ft:.1}"))?;
            detail.push(format!("{name}/s{seed} {mp:.0}<{ft:.0}"));
        }
    }
    Ok(detail.join(", "))
}

fn idqn_config(seed: u64) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::from_file(&manifest().join("configs/idqn.toml")).map_err(|e| e.to_string())?;
    cfg.experiment.seed = seed;
    Ok(cfg)
}

fn rl_beats_fixed_time() -> Outcome {
    let cfg = idqn_config(1)?;
    let scenario = cfg.load_scenario().map_err(|e| e.to_string())?;
    let ft = classical_travel_time(&scenario, Classical::FixedTime(FixedTimeConfig { t_fixed: 30.0 }))?;
    let bound = 0.95 * ft;
    let mut detail = vec![format!("FixedTime {ft:.1}, bound {bound:.1}")];
    for seed in [1, 2] {
        let cfg = idqn_config(seed)?;
        ensure(cfg.idqn.episodes == 200, || "config is not 200 episodes".into())?;
        let result = run_experiment(&cfg, &scenario, None).map_err(|e| e.to_string())?;
        let tt = result.summary.final_metrics.travel_time;
        ensure(tt <= bound, || format!("seed {seed}: IDQN {tt:.1} > {bound:.1}"))?;
        detail.push(format!("seed {seed} {tt:.1}"));
    }
    Ok(detail.join(", "))
}

fn training_logs(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<Vec<EpisodeLog>, String> {
    let mut env = TscEnv::new(&scenario.network, &scenario.flows, cfg.env_config().map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let dqn = cfg.dqn_config().ok_or("not a learning agent")?;
    let mut agents = build_agents(&env, dqn, cfg.experiment.seed).map_err(|e| e.to_string())?;
    let mut logs = run_training(&mut env, &mut agents, dqn.episodes, |_, _| Ok(())).map_err(|e| e.to_string())?;
    logs.iter_mut().for_each(|l| l.wall_seconds = 0.0);
    Ok(logs)
}

fn presslight_wiring() -> Outcome {
    let idqn = idqn_config(5)?;
    let scenario = idqn.load_scenario().map_err(|e| e.to_string())?;
    let mut press = idqn.clone();
    press.experiment.agent = AgentKind::Presslight;
    press.presslight = idqn.idqn.clone();
    press.env.reward_spec = Some(RewardName::NegWaitingCount);
    ensure(press.env_config().unwrap() == idqn.env_config().unwrap(), || "env wiring differs".into())?;
    let (a, b) = (training_logs(&idqn, &scenario)?, training_logs(&press, &scenario)?);
    ensure(a == b, || "training logs differ".into())?;
    let mut default_press = press.clone();
    default_press.env.reward_spec = None;
    ensure(
        default_press.env_config().unwrap().reward_spec == RewardName::NegPressureAbs,
        || "PressLight default reward is not pressure".into(),
    )?;
    Ok(format!("{} identical episodes", a.len()))
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for seed in 0..20 {
        let (w, s) = common::gradient_check(seed);
        worst = worst.max(w);
        skipped += s;
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:e}, {skipped} kink parameters skipped"))
}

fn episode_accounting() -> Outcome {
    let cfg = EnvConfig::default();
    ensure(cfg.episode_steps == 3600.0 && cfg.action_interval == 10.0, || "defaults changed".into())?;
    ensure(cfg.decisions() == 360, || format!("{} decisions", cfg.decisions()))?;
    let (net, flows) = fixtures::scenario("grid1x1").unwrap();
    let mut env = TscEnv::new(&net, &flows, cfg).map_err(|e| e.to_string())?;
    for episode in 0..2 {
        env.reset();
        let mut decisions = 0;
        loop {
            let a = env.sample_action();
            decisions += 1;
            if env.step(&a).map_err(|e| e.to_string())?.done {
                break;
            }
        }
        ensure(decisions == 360, || format!("episode {episode}: {decisions} decisions"))?;
        ensure(env.clock() == 3600.0, || format!("clock {}", env.clock()))?;
    }
    Ok("360 decisions per episode".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "delay formula exactness", 1, delay_formula),
        (2, "converter round trip", 30, converter_round_trip),
        (3, "calibration steps", 10, calibration),
        (4, "engine conservation and safety", 60, engine_safety),
        (5, "determinism", 300, determinism),
        (6, "MaxPressure oracle", 5, max_pressure_oracle),
        (7, "MaxPressure beats FixedTime", 300, ordering),
        (8, "IDQN beats FixedTime", 1800, rl_beats_fixed_time),
        (9, "PressLight equals IDQN modulo wiring", 120, presslight_wiring),
        (10, "gradient check", 10, gradient_check),
        (11, "episode accounting", 5, episode_accounting),
    ];
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "[PRIMARY] criterion {n:>2} {name}: {status} ({:.2} s) {detail}",
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
