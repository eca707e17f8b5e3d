use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use distelect_core::analysis::{
    error_table, map_report, report, run_matchups, state_win_probabilities, swing_bias_report,
    AllocationPlan, AnalysisError, GroundTruth, MatchupOptions,
};
use distelect_core::ingest::replay::ReplayServer;
use distelect_core::ingest::{
    fetch_cells, CachedSource, CellKey, CellSource, CellStore, EndpointConfig, LiveSource,
    RaceLookupError,
};
use distelect_core::{ec_distribution, win_probability, EVAllocation, StateRace};

use crate::output::emit;
use crate::{
    BiasArgs, EcArgs, EndpointArgs, FetchArgs, Format, MapArgs, MatchupArgs, MatchupSelect,
    ServeArgs, TruthArgs, UsageError,
};

fn endpoint_config(args: &EndpointArgs) -> Result<EndpointConfig> {
    let base_url = args
        .base_url
        .clone()
        .ok_or_else(|| UsageError("--base-url is required for live requests".into()))?;
    let model = args
        .model
        .clone()
        .ok_or_else(|| UsageError("--model is required for live requests".into()))?;
    let mut cfg = EndpointConfig::from_env(base_url, model)?;
    cfg.top_k = args.top_k;
    cfg.temperature = args.temperature;
    cfg.timeout = Duration::from_secs(args.timeout_secs);
    cfg.max_retries = args.max_retries;
    cfg.backoff_base = Duration::from_millis(args.backoff_ms);
    cfg.parallel = args.parallel;
    cfg.validate()?;
    Ok(cfg)
}

fn load_alloc(path: Option<&Path>, year: i32) -> Result<EVAllocation> {
    match path {
        Some(p) => EVAllocation::from_csv_path(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(EVAllocation::for_year(year)),
    }
}

fn load_store(path: &Path) -> Result<CellStore> {
    CellStore::load(path).with_context(|| format!("loading cell store {}", path.display()))
}

fn only<T: Clone + std::fmt::Debug>(values: &[T], what: &str, flag: &str) -> Result<T> {
    match values {
        [one] => Ok(one.clone()),
        _ => Err(UsageError(format!(
            "store holds {} {what} ({values:?}); pass {flag}",
            values.len()
        ))
        .into()),
    }
}

/// Resolves the matchup a store-backed command works on.
fn resolve_matchup(store: &CellStore, sel: &MatchupSelect) -> Result<(String, String, i32)> {
    let year = match sel.year {
        Some(y) => y,
        None => only(&store.years(), "years", "--year")?,
    };
    let names = store.candidates();
    let (c1, c2) = match (&sel.c1, &sel.c2) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        (Some(a), None) | (None, Some(a)) => {
            let others: Vec<String> = names.iter().filter(|n| *n != a).cloned().collect();
            let other = only(&others, "possible opponents", "both --c1 and --c2")?;
            if sel.c1.is_some() {
                (a.clone(), other)
            } else {
                (other, a.clone())
            }
        }
        (None, None) => match names.as_slice() {
            [a, b] => (a.clone(), b.clone()),
            _ => {
                return Err(UsageError(format!(
                    "store holds {} candidates ({names:?}); pass --c1 and --c2",
                    names.len()
                ))
                .into())
            }
        },
    };
    Ok((c1, c2, year))
}

struct Matchup {
    c1: String,
    c2: String,
    year: i32,
    alloc: EVAllocation,
    races: BTreeMap<String, StateRace>,
}

fn load_matchup(sel: &MatchupSelect) -> Result<Matchup> {
    let store = load_store(&sel.store)?;
    let (c1, c2, year) = resolve_matchup(&store, sel)?;
    let alloc = load_alloc(sel.alloc.as_deref(), year)?;
    let races = match store.races(&c1, &c2, year, alloc.states()) {
        Ok(r) => r,
        Err(RaceLookupError::Missing(states)) => bail!(
            "store is incomplete for {c1} vs {c2} ({year}); missing: {}",
            states.join(", ")
        ),
        Err(e) => return Err(e.into()),
    };
    Ok(Matchup {
        c1,
        c2,
        year,
        alloc,
        races,
    })
}

fn reject_format(format: Format, allowed: &[Format]) -> Result<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(UsageError(format!(
            "--format {} is not available for this command",
            format!("{format:?}").to_lowercase()
        ))
        .into())
    }
}

pub fn fetch(args: FetchArgs) -> Result<()> {
    let cfg = endpoint_config(&args.endpoint)?;
    let states: Vec<String> = if args.states.len() == 1 && args.states[0].eq_ignore_ascii_case("all") {
        EVAllocation::for_year(args.year).states().map(String::from).collect()
    } else {
        args.states.iter().map(|s| s.trim().to_string()).collect()
    };
    let mut keys = Vec::with_capacity(states.len() * 2);
    for state in &states {
        keys.push(CellKey::new(state, &args.c1, &args.c2, args.year));
        keys.push(CellKey::new(state, &args.c2, &args.c1, args.year));
    }
    let parallel = cfg.parallel;
    let live = LiveSource::new(cfg)?;
    let mut cells = Vec::with_capacity(keys.len());
    let mut failures = Vec::new();
    for result in fetch_cells(&live, &keys, parallel) {
        match result {
            Ok(cell) => cells.push(cell),
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("failed: {f}");
        }
        bail!("{} of {} cells failed; nothing written", failures.len(), keys.len());
    }
    let store = CellStore::from_cells(cells)?;
    store.save(&args.out)?;
    eprintln!("wrote {} cells to {}", store.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct WinRow {
    state: String,
    p_c1_wins: f64,
    p_c2_wins: f64,
    raw_tie_mass: f64,
}

#[derive(Serialize)]
struct WinTable {
    c1: String,
    c2: String,
    year: i32,
    states: Vec<WinRow>,
}

pub fn wins(sel: MatchupSelect) -> Result<()> {
    reject_format(sel.format, &[Format::Json, Format::Csv])?;
    let m = load_matchup(&sel)?;
    let mut rows = Vec::with_capacity(m.races.len());
    for (state, race) in &m.races {
        let w = win_probability(race)?;
        rows.push(WinRow {
            state: state.clone(),
            p_c1_wins: w.p_c1_wins,
            p_c2_wins: w.p_c2_wins,
            raw_tie_mass: w.raw_tie_mass,
        });
    }
    let text = match sel.format {
        Format::Csv => {
            let mut out = String::from("state,p_c1_wins,p_c2_wins,raw_tie_mass\n");
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.write_record([
                    r.state.clone(),
                    r.p_c1_wins.to_string(),
                    r.p_c2_wins.to_string(),
                    r.raw_tie_mass.to_string(),
                ])?;
            }
            out.push_str(std::str::from_utf8(&w.into_inner()?)?);
            out
        }
        _ => report::to_json(&WinTable {
            c1: m.c1,
            c2: m.c2,
            year: m.year,
            states: rows,
        }),
    };
    emit(sel.out.as_deref(), &text)
}

#[derive(Serialize)]
struct EcSummary {
    c1: String,
    c2: String,
    year: i32,
    e_total: u32,
    threshold: u32,
    win_chance: f64,
    loss_chance: f64,
    exact_tie_probability: Option<f64>,
    expected_votes: f64,
}

pub fn ec(args: EcArgs) -> Result<()> {
    reject_format(args.select.format, &[Format::Json])?;
    let m = load_matchup(&args.select)?;
    let wins = state_win_probabilities(&m.races)?;
    let dist = ec_distribution(&wins, &m.alloc)?;
    let threshold = args.threshold.unwrap_or_else(|| m.alloc.majority());
    let summary = EcSummary {
        c1: m.c1,
        c2: m.c2,
        year: m.year,
        e_total: dist.e_total(),
        threshold,
        win_chance: dist.win_chance(threshold)?,
        loss_chance: dist.loss_chance(threshold)?,
        exact_tie_probability: dist.exact_tie_probability().ok(),
        expected_votes: dist.expected_votes(),
    };
    if let Some(path) = &args.pmf {
        emit(Some(path), &report::pmf_csv(&dist))?;
    }
    emit(args.select.out.as_deref(), &report::to_json(&summary))
}

pub fn map(args: MapArgs) -> Result<()> {
    let m = load_matchup(&args.select)?;
    let report = map_report(&m.races, Some(&m.alloc))?;
    let text = match args.select.format {
        Format::Json => report::to_json(&report),
        Format::Csv => report::map_csv(&report),
        Format::Svg => report::map_svg(&report),
    };
    emit(args.select.out.as_deref(), &text)
}

fn load_truth_inputs(args: &TruthArgs) -> Result<(CellStore, GroundTruth)> {
    let store = load_store(&args.store)?;
    let year = match args.year {
        Some(y) => y,
        None => only(&store.years(), "years", "--year")?,
    };
    let truth = GroundTruth::from_csv_path(year, &args.truth)
        .with_context(|| format!("reading ground truth {}", args.truth.display()))?;
    Ok((store, truth))
}

pub fn error(args: TruthArgs) -> Result<()> {
    reject_format(args.format, &[Format::Json, Format::Csv])?;
    let (store, truth) = load_truth_inputs(&args)?;
    let report = error_table(store.cells(), &truth)?;
    let text = match args.format {
        Format::Csv => report::error_csv(&report),
        _ => report::to_json(&report),
    };
    emit(args.out.as_deref(), &text)
}

pub fn bias(args: BiasArgs) -> Result<()> {
    reject_format(args.truth.format, &[Format::Json, Format::Csv])?;
    let (store, truth) = load_truth_inputs(&args.truth)?;
    let report = swing_bias_report(store.cells(), &truth, args.margin)?;
    let text = match args.truth.format {
        Format::Csv => report::bias_csv(&report),
        _ => report::to_json(&report),
    };
    emit(args.truth.out.as_deref(), &text)
}

pub fn matchup(args: MatchupArgs) -> Result<()> {
    reject_format(args.format, &[Format::Json, Format::Csv])?;
    let allocation = match &args.alloc {
        Some(p) => AllocationPlan::Fixed(load_alloc(Some(p), 0)?),
        None => AllocationPlan::ByYear,
    };
    let trimmed = |v: &[String]| v.iter().map(|s| s.trim().to_string()).collect::<Vec<_>>();
    let (dems, reps) = (trimmed(&args.dems), trimmed(&args.reps));

    let store = match (&args.from_store, &args.cache) {
        (Some(p), _) => load_store(p)?,
        (None, Some(p)) if p.exists() => load_store(p)?,
        _ => CellStore::new(),
    };
    let live = if args.live {
        Some(LiveSource::new(endpoint_config(&args.endpoint)?)?)
    } else {
        None
    };
    let source = CachedSource::new(&store, live.as_ref().map(|l| l as &dyn CellSource));
    let opts = MatchupOptions {
        allocation,
        threshold: args.threshold,
        parallel: args.endpoint.parallel,
    };
    let outcome = run_matchups(&source, &dems, &reps, &args.years, &opts);
    let fetched_count = source.fallback_calls();
    let fetched = source.into_fetched();
    if let Some(cache) = &args.cache {
        if !fetched.is_empty() {
            let mut updated = store.clone();
            for cell in fetched {
                updated.insert(cell);
            }
            updated.save(cache)?;
        }
    }
    if args.live {
        eprintln!("fetched {fetched_count} cell(s) from the endpoint");
    }
    let grids = match outcome {
        Ok(g) => g,
        Err(AnalysisError::Fetch(failures)) => {
            for f in &failures {
                eprintln!("failed: {f}");
            }
            bail!("{} cell(s) could not be obtained", failures.len());
        }
        Err(e) => return Err(e.into()),
    };
    let text = match args.format {
        Format::Csv => report::grid_csv(&grids),
        _ => report::to_json(&grids),
    };
    emit(args.out.as_deref(), &text)
}

pub fn serve_stub(args: ServeArgs) -> Result<()> {
    let store = load_store(&args.store)?;
    let cells = store.len();
    let server = ReplayServer::start(store, &args.addr)
        .with_context(|| format!("binding {}", args.addr))?;
    {
        let mut stdout = std::io::stdout().lock();
        writeln!(stdout, "{}", server.base_url())?;
        stdout.flush()?;
    }
    eprintln!("replaying {cells} cells at {}", server.base_url());
    server.wait();
    Ok(())
}
