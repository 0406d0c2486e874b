use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ghostlab::analysis::{
    bell_s_chsh, bell_s_chsh_raw, bell_s_freedman, c_marginal, correlation_map, fringe_fit, kappa_fit, AverageAxis,
    BellReport, FringeFit,
};
use ghostlab::formats::{frame_set_from_files, parse_frame, parse_phase, write_counts, write_events, write_frame, write_phase};
use ghostlab::measurement::visibility_budget;
use ghostlab::montecarlo::{
    estimate_g2, g2_model, mean_bucket_acceptance, predicted_visibility, rate_report, run_classical_fringes, run_kappa_diagnostic, run_sequence,
    run_unconditional, uniform_sweep, Arm, ClassicalSpec, FrameSet, KappaRunSpec, NoiseModel, RunSpec,
};
use ghostlab::phaseret::{retrieve_phase, CarrierSign, CarrierWindow, FringeStack, RetrievalOptions};
use ghostlab::{Channel, Grid, KVector, PhaseProfile, Setting};

use crate::cli::{ArmArg, Cli, Command, Common, SignArg};
use crate::config::{parse_setting, RunConfig};
use crate::io::{find, read_text, write_text};
use crate::manifest::Manifest;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    crate::init_logging();
    match cli.command {
        Command::Simulate { common, out, bins, setting, trials, gzip, events, no_events } => {
            let events = if events { Some(true) } else if no_events { Some(false) } else { None };
            simulate(&common, out, bins, &setting, trials, gzip, events)
        }
        Command::Bell { config, frames, out, phase_signal, phase_idler, freedman_setting, phase_bins } => {
            let cfg = load_config(config.as_deref())?;
            let opts = BellOptions { phase_signal, phase_idler, freedman_setting, phase_bins };
            bell(&cfg, &frames, out.as_deref().unwrap_or(&frames), &opts)
        }
        Command::Stack { common, out, arm, steps, visibility, counts, bins, no_poisson, gzip } => {
            let sweep = Sweep { arm, steps, visibility, counts, poisson: !no_poisson };
            stack(&common, &out, &sweep, bins, gzip)
        }
        Command::RetrievePhase { stack, out, sign, window, remove_carrier } => {
            retrieve(&stack, &out, sign, window, remove_carrier)
        }
        Command::Budget { config, out } => {
            let cfg = load_config(config.as_deref())?;
            emit(out.as_deref(), "budget", &cfg, budget_text(&cfg))
        }
        Command::Rates { config, out } => {
            let cfg = load_config(config.as_deref())?;
            emit(out.as_deref(), "rates", &cfg, rates_text(&cfg))
        }
        Command::G2 { common, trials, setting, out } => {
            let cfg = load_common(&common)?;
            let setting = match setting {
                Some(s) => parse_setting(&s[0], &s[1]).map_err(CliError::Config)?,
                None => Setting::marginal(0.0),
            };
            let text = g2_text(&cfg, setting, trials, common.workers());
            emit(out.as_deref(), "g2", &cfg, text)
        }
        Command::Kappa { common, trials, hist_bins, range, out } => {
            let cfg = load_common(&common)?;
            kappa(&cfg, trials, hist_bins, range, common.workers(), out.as_deref())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::reference(),
    }
}

fn load_common(c: &Common) -> Result<RunConfig> {
    let mut cfg = load_config(c.config.as_deref())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_bins(cfg: &mut RunConfig, bins: Option<Vec<usize>>) -> Result<()> {
    if let Some(b) = bins {
        if b.iter().any(|&n| n == 0 || n > 4096) {
            return Err(CliError::Config(format!("--bins must be in 1..=4096, got {} {}", b[0], b[1])));
        }
        cfg.bins = (b[0], b[1]);
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))
}

fn base_manifest(path: PathBuf, command: &str, cfg: &RunConfig) -> Manifest {
    let mut m = Manifest::new(path, command);
    m.set("config_sha256", &cfg.sha256);
    m
}

/// Prints `text`; with `out`, also writes `<name>.txt` and its manifest there.
fn emit(out: Option<&Path>, name: &str, cfg: &RunConfig, text: Result<String>) -> Result<()> {
    let Some(dir) = out else {
        print!("{}", text?);
        return Ok(());
    };
    create_dir(dir)?;
    let mut m = base_manifest(dir.join(format!("{name}.manifest")), name, cfg);
    m.set("seed", cfg.seed);
    let file = format!("{name}.txt");
    let r = text.and_then(|t| {
        write_text(dir, &file, &t, false).map_err(|e| CliError::io(dir.join(&file).display(), e))?;
        print!("{t}");
        Ok(())
    });
    if r.is_ok() {
        m.output(file);
    }
    m.finish(r)
}

fn frame_name(i: usize, ch: Channel) -> String {
    let c = match ch {
        Channel::Plus => "plus",
        Channel::Minus => "minus",
    };
    format!("frame_{:02}_{c}.txt", i + 1)
}

fn simulate(
    common: &Common,
    out: Option<PathBuf>,
    bins: Option<Vec<usize>>,
    setting: &[String],
    trials: Option<u64>,
    gzip: bool,
    events: Option<bool>,
) -> Result<()> {
    let mut cfg = load_common(common)?;
    apply_bins(&mut cfg, bins)?;
    if let Some(n) = trials {
        if n == 0 {
            return Err(CliError::Config("--trials must be at least 1".into()));
        }
        cfg.n_trials = n;
    }
    if !setting.is_empty() {
        cfg.settings = setting
            .chunks(2)
            .map(|c| parse_setting(&c[0], &c[1]))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::Config(format!("--setting: {e}")))?;
    }
    let events = events.unwrap_or(cfg.events);
    let dir = out.unwrap_or_else(|| cfg.out.clone());
    let workers = common.workers();
    create_dir(&dir)?;

    let mut m = base_manifest(dir.join("simulate.manifest"), "simulate", &cfg);
    m.set("seed", cfg.seed);
    m.set("n_trials", cfg.n_trials);
    m.set("bins", format!("{} {}", cfg.bins.0, cfg.bins.1));
    for (i, s) in cfg.settings.iter().enumerate() {
        m.set(&format!("setting.{}", i + 1), s);
    }
    let r = simulate_into(&cfg, &dir, workers, gzip, events, &mut m);
    m.finish(r)
}

fn simulate_into(cfg: &RunConfig, dir: &Path, workers: usize, gzip: bool, events: bool, m: &mut Manifest) -> Result<()> {
    let write = |name: &str, text: &str| write_text(dir, name, text, gzip).map_err(|e| CliError::io(dir.join(name).display(), e));
    for (name, p) in [("phase_signal.txt", &cfg.state.phase_s), ("phase_idler.txt", &cfg.state.phase_i)] {
        std::fs::write(dir.join(name), write_phase(p)).map_err(|e| CliError::io(dir.join(name).display(), e))?;
        m.output(name);
    }
    let grid = cfg.grid();
    for (i, &setting) in cfg.settings.iter().enumerate() {
        let mut spec = RunSpec::new(setting, cfg.n_trials, cfg.seed, grid);
        spec.optics_visibility = cfg.optics_visibility;
        spec.record_events = events;
        log::info!("setting {}: {setting}", i + 1);
        let o = run_sequence(&cfg.state, &cfg.noise, &spec, workers)?;
        for ch in [Channel::Plus, Channel::Minus] {
            let name = write(&frame_name(i, ch), &write_frame(&o.frames, ch))?;
            m.output(name);
        }
        if events {
            let name = write(&format!("events_{:02}.txt", i + 1), &write_events(&o.events))?;
            m.output(name);
        }
        println!(
            "setting {} ({setting}): {} trials, {} bucket clicks, {} camera counts",
            i + 1,
            o.frames.trials,
            o.frames.bucket_clicks,
            o.frames.total_hits()
        );
    }
    Ok(())
}

/// Frame sets of a directory, in file-number order.
fn load_frames(dir: &Path, half_width: f64) -> Result<Vec<FrameSet>> {
    let rd = std::fs::read_dir(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let mut numbers = Vec::new();
    for entry in rd {
        let name = entry.map_err(|e| CliError::io(dir.display(), e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(n) = name.strip_prefix("frame_").and_then(|r| r.split_once("_plus.txt")).and_then(|(n, _)| n.parse::<usize>().ok()) {
            numbers.push(n);
        }
    }
    numbers.sort_unstable();
    numbers.dedup();
    let mut out = Vec::new();
    for n in numbers {
        let read = |ch: &str| -> Result<ghostlab::formats::ParsedFrame> {
            let name = format!("frame_{n:02}_{ch}.txt");
            let path = find(dir, &name).ok_or_else(|| CliError::Io(format!("{}: missing", dir.join(&name).display())))?;
            let text = read_text(&path).map_err(|e| CliError::io(path.display(), e))?;
            parse_frame(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        };
        out.push(frame_set_from_files(&read("plus")?, &read("minus")?, half_width)?);
    }
    Ok(out)
}

fn phase_from(arg: &Option<PathBuf>, frames: &Path, default_name: &str, fallback: &PhaseProfile) -> Result<PhaseProfile> {
    let path = match arg {
        Some(p) => Some(p.clone()),
        None => find(frames, default_name),
    };
    match path {
        Some(p) => {
            let text = read_text(&p).map_err(|e| CliError::io(p.display(), e))?;
            parse_phase(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(fallback.clone()),
    }
}

pub struct BellOptions {
    pub phase_signal: Option<PathBuf>,
    pub phase_idler: Option<PathBuf>,
    pub freedman_setting: usize,
    pub phase_bins: usize,
}

fn bell(cfg: &RunConfig, frames_dir: &Path, out: &Path, opts: &BellOptions) -> Result<()> {
    // phases and frames are read before anything is written
    let phase_s = phase_from(&opts.phase_signal, frames_dir, "phase_signal.txt", &cfg.state.phase_s)?;
    let phase_i = phase_from(&opts.phase_idler, frames_dir, "phase_idler.txt", &cfg.state.phase_i)?;
    let state = ghostlab::BellEprState::new(cfg.state.params, phase_s, phase_i)?;
    let frames = load_frames(frames_dir, state.params.fov_half_width)?;
    create_dir(out)?;
    let mut m = base_manifest(out.join("bell.manifest"), "bell", cfg);
    let r = bell_into(&state, &frames, out, opts, &mut m);
    m.finish(r)
}

fn bell_into(state: &ghostlab::BellEprState, frames: &[FrameSet], out: &Path, opts: &BellOptions, m: &mut Manifest) -> Result<()> {
    let marginal = frames.iter().find(|f| f.setting.is_marginal()).ok_or_else(|| {
        ghostlab::Error::InsufficientData(
            "no marginal-setting frames (theta_s = INF): the C^inf term of the Bell combination cannot be evaluated".into(),
        )
    })?;
    let analyzed: Vec<&FrameSet> = frames.iter().filter(|f| !f.setting.is_marginal()).collect();
    if analyzed.len() < 4 {
        return Err(ghostlab::Error::InsufficientData(format!(
            "the four-setting Bell parameter needs 4 analyzer settings, found {}",
            analyzed.len()
        ))
        .into());
    }
    let chsh = chsh_order(&analyzed[..4])?;
    let c_inf = c_marginal(marginal)?;
    let phase = |k: KVector| state.anticorrelated_phase(k).unwrap_or(0.0);

    let mut fits: Vec<FringeFit> = Vec::with_capacity(4);
    for f in &chsh {
        fits.push(fringe_fit(&correlation_map(f), phase, AverageAxis::Kx)?);
    }
    let vis: [(f64, f64); 4] = std::array::from_fn(|j| (fits[j].visibility, fits[j].visibility_err));
    let s_chsh = bell_s_chsh(&vis, c_inf)?;
    let fit_arr: [FringeFit; 4] = std::array::from_fn(|j| fits[j].clone());
    let s_raw = bell_s_chsh_raw(&fit_arr, c_inf)?;

    let fi = opts.freedman_setting;
    let single = analyzed
        .get(fi.wrapping_sub(1))
        .ok_or_else(|| CliError::Config(format!("--freedman-setting {fi} is not among the {} analyzer settings", analyzed.len())))?;
    let fr = bell_s_freedman(single, phase, opts.phase_bins, c_inf)?;

    let report = BellReport {
        visibilities: chsh
            .iter()
            .zip(&fits)
            .map(|(f, fit)| (f.setting, (fit.visibility, fit.visibility_err), (fit.offset, fit.offset_err)))
            .collect(),
        c_marginal: c_inf,
        s_chsh,
        s_chsh_raw: s_raw,
        freedman_setting: single.setting,
        freedman_visibility: (fr.visibility, fr.visibility_err),
        s_freedman: (fr.s, fr.s_err),
        curve: fr.curve.clone(),
    };
    let text = report.to_text();
    std::fs::write(out.join("bell_report.txt"), &text).map_err(|e| CliError::io(out.join("bell_report.txt").display(), e))?;
    m.output("bell_report.txt");
    let mut curve = String::from("# phi c c_err n\n");
    for p in &fr.curve {
        let _ = writeln!(curve, "{} {} {} {}", p.phi, p.c, p.c_err, p.n);
    }
    std::fs::write(out.join("freedman_curve.txt"), curve).map_err(|e| CliError::io(out.join("freedman_curve.txt").display(), e))?;
    m.output("freedman_curve.txt");

    for (s, v, _) in &report.visibilities {
        println!("V({s}) = {:.4} ± {:.4}", v.0, v.1);
    }
    println!("C_inf = {:.4} ± {:.4}", c_inf.0, c_inf.1);
    println!("S_chsh = {:.4} ± {:.4}", s_chsh.0, s_chsh.1);
    println!("S_chsh_raw = {:.4} ± {:.4}", s_raw.0, s_raw.1);
    println!("S_freedman = {:.4} ± {:.4}  ({})", fr.s, fr.s_err, single.setting);
    if report.violation() {
        let sd = [report.sd_violation_chsh(), report.sd_violation_freedman()].into_iter().flatten().fold(0.0, f64::max);
        println!("*** VIOLATION: S - 2 exceeds 3 standard errors ({sd:.1} SD) ***");
    } else {
        println!("no violation: S - 2 is within 3 standard errors");
    }
    Ok(())
}

/// Orders four frame sets as `(a,b), (a,b'), (a',b), (a',b')`, with `a`, `b`
/// taken from the first.
fn chsh_order<'a>(f: &[&'a FrameSet]) -> Result<[&'a FrameSet; 4]> {
    let angles = |x: &FrameSet| (x.setting.phase_offset().map(|o| o + x.setting.theta_i).unwrap_or(f64::NAN), x.setting.theta_i);
    let (a, b) = angles(f[0]);
    let other = |pick: fn((f64, f64)) -> f64, v: f64| f.iter().map(|x| pick(angles(x))).find(|&t| t != v);
    let bad = || CliError::Config("the first four analyzer settings must form a 2x2 grid of (theta_s, theta_i) values".into());
    let a2 = other(|p| p.0, a).ok_or_else(bad)?;
    let b2 = other(|p| p.1, b).ok_or_else(bad)?;
    let get = |ts: f64, ti: f64| f.iter().copied().find(|x| angles(x) == (ts, ti)).ok_or_else(bad);
    Ok([get(a, b)?, get(a, b2)?, get(a2, b)?, get(a2, b2)?])
}

pub struct Sweep {
    pub arm: ArmArg,
    pub steps: usize,
    pub visibility: f64,
    pub counts: f64,
    pub poisson: bool,
}

fn stack(common: &Common, out: &Path, sw: &Sweep, bins: Option<Vec<usize>>, gzip: bool) -> Result<()> {
    let Sweep { arm, steps, visibility, counts, poisson } = *sw;
    let mut cfg = load_common(common)?;
    apply_bins(&mut cfg, bins)?;
    if steps < 3 {
        return Err(CliError::Config(format!("--steps must be at least 3, got {steps}")));
    }
    let arm = match arm {
        ArmArg::Signal => Arm::Signal,
        ArmArg::Idler => Arm::Idler,
        ArmArg::Joint => Arm::Joint,
    };
    let grid = cfg.grid();
    let spec = ClassicalSpec { grid, visibility, mean_intensity: counts, poisson, seed: cfg.seed };
    let frames = run_classical_fringes(&cfg.state, arm, &uniform_sweep(arm, steps), &spec)?;
    create_dir(out)?;
    let mut m = base_manifest(out.join("stack.manifest"), "stack", &cfg);
    m.set("seed", cfg.seed);
    let r = (|| {
        let arm_name = format!("{arm:?}").to_lowercase();
        let mut index = format!("STACK v1 {} {} {} {arm_name}\n# plus minus global_phase\n", grid.nx, grid.ny, grid.half_width);
        for (j, f) in frames.iter().enumerate() {
            let mut names = Vec::new();
            for (ch, data, tag) in [(Channel::Plus, &f.plus, "plus"), (Channel::Minus, &f.minus, "minus")] {
                let text = write_counts(grid.nx, grid.ny, &f.setting, ch, data.iter().map(|&v| v.round() as u64));
                let name = write_text(out, &format!("stack_{j:03}_{tag}.txt"), &text, gzip).map_err(|e| CliError::io(out.display(), e))?;
                m.output(name.clone());
                names.push(name);
            }
            let _ = writeln!(index, "{} {} {}", names[0], names[1], f.global_phase);
        }
        std::fs::write(out.join("stack.txt"), index).map_err(|e| CliError::io(out.join("stack.txt").display(), e))?;
        m.output("stack.txt");
        println!("wrote {} frame pairs to {}", frames.len(), out.display());
        Ok(())
    })();
    m.finish(r)
}

fn read_stack(dir: &Path) -> Result<FringeStack> {
    let path = dir.join("stack.txt");
    let text = read_text(&path).map_err(|e| CliError::io(path.display(), e))?;
    let err = |line: usize, msg: &str| CliError::Config(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty stack index"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 5 || h[0] != "STACK" || h[1] != "v1" {
        return Err(err(hl + 1, "expected 'STACK v1 nx ny half_width arm'"));
    }
    let nx: usize = h[2].parse().map_err(|_| err(hl + 1, "bad nx"))?;
    let ny: usize = h[3].parse().map_err(|_| err(hl + 1, "bad ny"))?;
    let hw: f64 = h[4].parse().map_err(|_| err(hl + 1, "bad half_width"))?;
    let grid = Grid::new(nx, ny, hw)?;
    let (mut frames, mut phases) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(err(i + 1, "rows are 'plus_file minus_file global_phase'"));
        }
        let load = |name: &str| -> Result<Vec<u64>> {
            let p = dir.join(name);
            let f = parse_frame(&read_text(&p).map_err(|e| CliError::io(p.display(), e))?)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if (f.nx, f.ny) != (nx, ny) {
                return Err(CliError::Config(format!("{}: frame is {}x{}, index says {nx}x{ny}", p.display(), f.nx, f.ny)));
            }
            Ok(f.counts)
        };
        let (p, q) = (load(t[0])?, load(t[1])?);
        frames.push(
            p.iter()
                .zip(&q)
                .map(|(&a, &b)| if a + b > 0 { (a as f64 - b as f64) / (a + b) as f64 } else { f64::NAN })
                .collect(),
        );
        phases.push(t[2].parse().map_err(|_| err(i + 1, "bad global phase"))?);
    }
    let (stack, warnings) = FringeStack::new(grid, frames, phases)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(stack)
}

fn retrieve(dir: &Path, out: &Path, sign: SignArg, window: Option<f64>, remove_carrier: bool) -> Result<()> {
    let stack = read_stack(dir)?;
    let opts = RetrievalOptions {
        window: window.map_or(CarrierWindow::Auto, CarrierWindow::HalfWidth),
        sign: match sign {
            SignArg::Positive => CarrierSign::Positive,
            SignArg::Negative => CarrierSign::Negative,
        },
        remove_carrier,
    };
    let mut manifest_path = out.as_os_str().to_owned();
    manifest_path.push(".manifest");
    let mut m = Manifest::new(PathBuf::from(manifest_path), "retrieve-phase");
    m.set("frames", stack.frames.len());
    let r = (|| {
        let got = retrieve_phase(&stack, &opts)?;
        for w in &got.warnings {
            log::warn!("{w}");
        }
        std::fs::write(out, write_phase(&PhaseProfile::Sampled(got.profile.clone()))).map_err(|e| CliError::io(out.display(), e))?;
        m.output(out.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()));
        println!("carrier = {} {}", got.carrier.0, got.carrier.1);
        println!("coherence = {}", got.coherence);
        Ok(())
    })();
    m.finish(r)
}

fn budget_text(cfg: &RunConfig) -> Result<String> {
    let b = cfg.budget;
    let v = visibility_budget(b.v_ult, b.optics, b.alpha, b.kappa, b.xi_k)?;
    let mut o = String::new();
    let _ = writeln!(o, "v_ult = {:.4}", v.v_ult);
    let _ = writeln!(o, "v_optics = {:.4}", v.v_optics);
    let _ = writeln!(o, "v_kappa = {:.4}    # alpha = {} rad mm, kappa = {} /mm", v.v_kappa, b.alpha, b.kappa);
    let _ = writeln!(o, "v_xi = {:.4}    # xi_k = {} /mm", v.v_xi, b.xi_k);
    let _ = writeln!(o, "v_total = {:.4}", v.v_total);
    if let Some(s) = cfg.settings.iter().find(|s| !s.is_marginal()) {
        let p = predicted_visibility(&cfg.state, &cfg.noise, s, cfg.optics_visibility)?;
        let _ = writeln!(o, "simulated_visibility = {p:.4}    # expected fringe visibility of the configured run");
    }
    Ok(o)
}

/// Rounds to one significant figure, the precision of the comparison table.
fn one_figure(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powf(x.abs().log10().floor());
    (x / scale).round() * scale
}

fn rates_text(cfg: &RunConfig) -> Result<String> {
    let r = rate_report(&cfg.rates)?;
    let i = cfg.rates;
    let mut o = String::new();
    let _ = writeln!(o, "trial_rate = {}", i.trial_rate);
    let _ = writeln!(o, "duty_cycle = {}", i.duty_cycle);
    let _ = writeln!(o, "coincidences_per_trial = {:.6e}", r.coincidences_per_trial);
    let _ = writeln!(o, "retention = {:.6}", r.retention);
    let _ = writeln!(o, "retention_at_half_time = {}", r.retention_at_anchor);
    let _ = writeln!(o, "cps = {:.3}", r.cps);
    let _ = writeln!(o, "cps_instantaneous = {:.3}", r.cps_instantaneous);
    let _ = writeln!(o, "\n# approach R[cps] R_instantaneous[cps] t_half[us]");
    let _ = writeln!(o, "QM {} {} {}", one_figure(r.cps), one_figure(r.cps_instantaneous), i.half_retention * 1e6);
    Ok(o)
}

fn g2_text(cfg: &RunConfig, setting: Setting, trials: u64, workers: usize) -> Result<String> {
    let t = run_unconditional(&cfg.state, &cfg.noise, setting, trials, cfg.seed, workers)?;
    // the model's signal efficiency includes the aperture and the analyzer
    let polarizer = if setting.is_marginal() { 1.0 } else { 0.5 };
    let effective = NoiseModel { chi_s: cfg.noise.chi_s * polarizer * mean_bucket_acceptance(&cfg.state)?, ..cfg.noise };
    let e = estimate_g2(&t, &effective)?;
    let model = g2_model(&effective)?;
    let mut o = String::new();
    let _ = writeln!(o, "setting = {setting}");
    let _ = writeln!(o, "chi_s_effective = {}", effective.chi_s);
    let _ = writeln!(o, "trials = {}", t.trials);
    let _ = writeln!(o, "signal = {}", t.signal);
    let _ = writeln!(o, "idler = {}", t.idler);
    let _ = writeln!(o, "coincidences = {}", t.coincidences);
    let _ = writeln!(o, "g2 = {} {}", e.value, e.std_error);
    let _ = writeln!(o, "g2_model = {model}");
    let _ = writeln!(o, "g2_model_from_rates = {}", e.model_from_rates);
    let _ = writeln!(o, "deviation_sd = {}", (e.value - model) / e.std_error);
    Ok(o)
}

fn kappa(cfg: &RunConfig, trials: u64, bins: usize, range: f64, workers: usize, out: Option<&Path>) -> Result<()> {
    let spec = KappaRunSpec { n_trials: trials, seed: cfg.seed, bins, half_range: range };
    let text = (|| {
        let h = run_kappa_diagnostic(&cfg.state, &cfg.noise, &spec, workers)?;
        let k = kappa_fit(&h)?;
        let mut o = String::new();
        let _ = writeln!(o, "kappa = {} {}", k.kappa, k.kappa_err);
        for (axis, name) in [(0, "x"), (1, "y")] {
            for (c, ch) in [(0, "plus"), (1, "minus")] {
                let f = k.per_direction[axis][c];
                let _ = writeln!(o, "kappa.{name}.{ch} = {} {}", f.sigma, f.sigma_err);
            }
        }
        let _ = writeln!(o, "\n[histogram]\n# center net_x_plus net_x_minus net_y_plus net_y_minus");
        let nets: Vec<Vec<f64>> = [(0, Channel::Plus), (0, Channel::Minus), (1, Channel::Plus), (1, Channel::Minus)]
            .iter()
            .map(|&(a, ch)| h.net(a, ch).0)
            .collect();
        for (j, c) in h.centers.iter().enumerate() {
            let _ = writeln!(o, "{c} {} {} {} {}", nets[0][j], nets[1][j], nets[2][j], nets[3][j]);
        }
        Ok(o)
    })();
    emit(out, "kappa", cfg, text)
}
