use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveTime};
use nalgebra::DMatrix;
use serde_json::json;
use spillover::dynamics::{
    annotate, linear_trend, ratio_series, read_events_csv, rolling_connectedness, write_rolling_csv, MeasureKey,
    MeasureSpec, RollingConfig, TIME_DOMAIN_BAND,
};
use spillover::freqdomain::{
    band_measures_with, band_report_json, reconstruction_residual, spectral_gfevd_with, write_band_csv, BandMeasures,
    SpectralBasis,
};
use spillover::ingest::{
    build_panel, filter_calendar, load_ticks, read_panel_csv, resample_grid, summary_stats, synth_var_panel,
    write_panel_csv, write_summary_csv, Session, VolatilityPanel,
};
use spillover::timedomain::{dy_measures, gfevd, ConnectednessTable, DyMeasures};
use spillover::varcore::{fit_var, stability, wold, VarModel};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::runlog::RunLog;

/// Output files written by a command, relative to the output directory.
pub type Written = Vec<PathBuf>;

pub fn rv(cfg: &RunConfig, log: &mut RunLog) -> CliResult<Written> {
    let inputs = &cfg.data.inputs;
    if inputs.is_empty() {
        return Err(CliError::usage("rv needs at least one tick CSV"));
    }
    let symbols = symbols_for(cfg)?;
    let session = session(cfg)?;
    let spacing = Duration::minutes(i64::from(cfg.rv.spacing_minutes));
    let mut written = Vec::new();
    let mut daily = Vec::new();

    for (path, symbol) in inputs.iter().zip(&symbols) {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let ticks = load_ticks(BufReader::new(file), symbol).context(|| path.display().to_string())?;
        let filtered = filter_calendar(&ticks, &cfg.rv.calendar).context(|| symbol.clone())?;
        log.event(
            "calendar_filter",
            &[
                ("symbol", symbol),
                ("ticks", &ticks.len()),
                ("excluded", &(ticks.len() - filtered.len())),
            ],
        );
        let (days, skipped) = resample_grid(&filtered, spacing, session).context(|| symbol.clone())?;
        for day in &skipped {
            log.event(
                "skipped_day",
                &[
                    ("symbol", symbol),
                    ("date", &day.date),
                    ("reason", &"too_few_grid_prices"),
                    ("grid_prices", &day.usable_grid_prices),
                ],
            );
        }
        let mut series = Vec::with_capacity(days.len());
        for day in &days {
            match day.bipower_variation() {
                Ok(bpv) => series.push((day.trading_day, bpv)),
                Err(_) => log.event(
                    "skipped_day",
                    &[
                        ("symbol", symbol),
                        ("date", &day.trading_day),
                        ("reason", &"too_few_returns"),
                        ("returns", &day.returns.len()),
                    ],
                ),
            }
        }
        let name = PathBuf::from(format!("rv_{symbol}.csv"));
        write_with(cfg, &name, |w| write_daily_csv(&series, w))?;
        log.event("rv", &[("symbol", symbol), ("days", &series.len())]);
        written.push(name);
        daily.push((symbol.clone(), series));
    }

    if daily.len() < 2 {
        log.event("panel_skipped", &[("reason", &"fewer_than_two_symbols")]);
        return Ok(written);
    }
    let panel = build_panel(&daily, cfg.data.transform).context(|| "panel".to_string())?;
    log.event(
        "panel",
        &[("dates", &panel.len()), ("symbols", &panel.k()), ("transform", &panel.transform())],
    );
    write_with(cfg, Path::new("panel.csv"), |w| write_panel_csv(&panel, w))?;
    written.push("panel.csv".into());
    if panel.len() < 2 {
        log.event("summary_skipped", &[("reason", &"fewer_than_two_dates")]);
        return Ok(written);
    }
    let stats = summary_stats(&panel).context(|| "summary".to_string())?;
    write_with(cfg, Path::new("summary.csv"), |w| write_summary_csv(&stats, w))?;
    written.push("summary.csv".into());
    Ok(written)
}

pub fn fit(cfg: &RunConfig, log: &mut RunLog) -> CliResult<Written> {
    let panel = read_panel(cfg)?;
    let model = fit_var(&panel, cfg.model.lags, cfg.model.intercept).context(|| "fit".to_string())?;
    let check = stability(&model);
    log.event(
        "fit",
        &[
            ("k", &model.k()),
            ("lags", &model.p()),
            ("observations", &model.n_obs()),
            ("spectral_radius", &check.spectral_radius),
            ("stable", &check.stable),
        ],
    );
    if !check.stable {
        log.event("warning", &[("message", &"fitted model is not stable; connect and roll will reject it")]);
    }
    let text = model.to_json().context(|| "model".to_string())?;
    write_text(cfg, Path::new("model.json"), &text)?;
    Ok(vec!["model.json".into()])
}

/// Everything `connect` and `synth` report for one model.
struct Report {
    table: ConnectednessTable,
    measures: DyMeasures,
    bands: Vec<BandMeasures>,
    residual: Option<f64>,
}

fn report(cfg: &RunConfig, model: &VarModel) -> CliResult<Report> {
    let seq = wold(model, cfg.connect.htrunc).context(|| "moving-average representation".to_string())?;
    let table = gfevd(model, &seq, cfg.connect.htrunc).context(|| "decomposition".to_string())?;
    let measures = dy_measures(&table);
    let specs = cfg.bands()?;
    let basis = SpectralBasis::new(cfg.connect.nfreq, cfg.connect.htrunc).context(|| "frequency grid".to_string())?;
    let grid = spectral_gfevd_with(&basis, model, &seq).context(|| "spectral decomposition".to_string())?;
    let bands = specs
        .iter()
        .map(|b| band_measures_with(&grid, b, cfg.connect.standardization))
        .collect::<spillover::Result<Vec<_>>>()
        .context(|| "band measures".to_string())?;
    let residual = cfg
        .connect
        .reconcile
        .then(|| reconstruction_residual(&bands, measures.total));
    Ok(Report {
        table,
        measures,
        bands,
        residual,
    })
}

impl Report {
    fn json(&self) -> serde_json::Value {
        let band_sum: f64 = self.bands.iter().map(|b| b.absolute_total).sum();
        json!({
            "table": self.table,
            "measures": self.measures,
            "bands": band_report_json(&self.bands),
            "reconciliation": self.residual.map(|r| json!({
                "time_total": self.measures.total,
                "band_sum": band_sum,
                "residual": r,
            })),
        })
    }

    fn log(&self, log: &mut RunLog) {
        log.event("total", &[("value", &self.measures.total)]);
        for b in &self.bands {
            let within = b.within_total().map_or_else(|| "NA".to_string(), |v| v.to_string());
            log.event(
                "band",
                &[
                    ("label", &b.band.label),
                    ("grid_points", &b.grid_points),
                    ("within_total", &within),
                    ("gamma", &b.gamma),
                    ("absolute_total", &b.absolute_total),
                ],
            );
        }
        if let Some(r) = self.residual {
            log.event("reconciliation", &[("residual", &r)]);
        }
    }
}

pub fn connect(cfg: &RunConfig, log: &mut RunLog) -> CliResult<Written> {
    let bands = cfg.bands()?;
    let panel = read_panel(cfg)?;
    let model = fit_var(&panel, cfg.model.lags, cfg.model.intercept).context(|| "fit".to_string())?;
    log.event(
        "fit",
        &[("k", &model.k()), ("lags", &model.p()), ("observations", &model.n_obs())],
    );
    let report = report(cfg, &model)?;
    report.log(log);
    if let Some(r) = report.residual {
        let band_sum: f64 = report.bands.iter().map(|b| b.absolute_total).sum();
        println!(
            "reconciliation: |sum over bands - total| = {r:.3e} (total {:.6}, band sum {band_sum:.6})",
            report.measures.total
        );
    }

    let mut doc = report.json();
    doc["variables"] = json!(model.variable_names());
    doc["lags"] = json!(model.p());
    doc["intercept"] = json!(model.has_intercept());
    doc["observations"] = json!(model.n_obs());
    doc["horizon"] = json!(cfg.connect.htrunc);
    doc["n_freq"] = json!(cfg.connect.nfreq);
    doc["band_specs"] = json!(bands);
    write_json(cfg, Path::new("connect.json"), &doc)?;
    write_with(cfg, Path::new("table.csv"), |w| report.table.write_csv(w))?;
    write_with(cfg, Path::new("bands.csv"), |w| {
        write_band_csv(&report.bands, model.variable_names(), w)
    })?;
    Ok(vec!["connect.json".into(), "table.csv".into(), "bands.csv".into()])
}

pub fn roll(cfg: &RunConfig, log: &mut RunLog) -> CliResult<Written> {
    let bands = cfg.bands()?;
    let events = match &cfg.rolling.events {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            Some(read_events_csv(BufReader::new(file)).context(|| path.display().to_string())?)
        }
        None => None,
    };
    let panel = read_panel(cfg)?;
    let rolling = RollingConfig {
        p: cfg.model.lags,
        include_intercept: cfg.model.intercept,
        window: cfg.rolling.window,
        step: cfg.rolling.step,
        spec: MeasureSpec {
            h_trunc: cfg.connect.htrunc,
            n_freq: cfg.connect.nfreq,
            bands: bands.clone(),
            time_domain: true,
            directional: cfg.rolling.directional,
            standardization: cfg.connect.standardization,
        },
        bootstrap: cfg.bootstrap_config(),
        execution: cfg.execution,
    };
    let mut result = rolling_connectedness(&panel, &rolling).context(|| "rolling".to_string())?;
    log.event(
        "rolling",
        &[
            ("windows", &result.n_windows()),
            ("window", &result.window_length),
            ("step", &result.step),
            ("gaps", &result.gaps.len()),
        ],
    );
    for gap in &result.gaps {
        log.event(
            "window_gap",
            &[
                ("index", &gap.index),
                ("anchor", &gap.anchor_date),
                ("reason", &gap.reason.code()),
                ("detail", &gap.detail),
            ],
        );
    }
    if let Some(events) = &events {
        result = annotate(&result, events);
        for mark in &result.events {
            match mark.anchor_date {
                Some(anchor) => log.event("event", &[("label", &mark.label), ("date", &mark.date), ("anchor", &anchor)]),
                None => log.event("event_unplaced", &[("label", &mark.label), ("date", &mark.date)]),
            }
        }
    }

    write_with(cfg, Path::new("rolling.csv"), |w| write_rolling_csv(&result, w))?;
    write_json(cfg, Path::new("rolling.json"), &serde_json::to_value(&result).expect("result serializes"))?;
    let mut written: Written = vec!["rolling.csv".into(), "rolling.json".into()];

    let mut trends = Vec::new();
    let total_key = MeasureKey::new("total", TIME_DOMAIN_BAND);
    let total = result.values(&total_key).expect("total is always computed");
    trends.push(trend_entry(log, "total", TIME_DOMAIN_BAND, None, &total));

    if bands.len() >= 2 && !cfg.rolling.ratios.is_empty() {
        let (short, long) = (&bands[0].label, &bands[1].label);
        let mut rows = Vec::new();
        for measure in &cfg.rolling.ratios {
            let ratios = ratio_series(
                &result,
                &MeasureKey::new(measure.as_str(), short.as_str()),
                &MeasureKey::new(measure.as_str(), long.as_str()),
            )
            .context(|| format!("ratio of `{measure}`"))?;
            trends.push(trend_entry(log, measure, short, Some(long), &ratios));
            rows.push((measure.as_str(), ratios));
        }
        write_with(cfg, Path::new("ratios.csv"), |w| write_ratios(&rows, short, long, w))?;
        written.push("ratios.csv".into());
    }
    write_json(cfg, Path::new("trend.json"), &json!(trends))?;
    written.push("trend.json".into());
    Ok(written)
}

fn trend_entry(
    log: &mut RunLog,
    measure: &str,
    band: &str,
    denominator_band: Option<&str>,
    series: &[(NaiveDate, Option<f64>)],
) -> serde_json::Value {
    let name = match denominator_band {
        Some(_) => format!("ratio:{measure}"),
        None => measure.to_string(),
    };
    match linear_trend(series) {
        Ok(fit) => {
            let se = fit.slope_std_error.map_or_else(|| "NA".to_string(), |v| v.to_string());
            log.event("trend", &[("series", &name), ("slope", &fit.slope), ("slope_se", &se), ("r2", &fit.r_squared)]);
            json!({ "series": name, "band": band, "denominator_band": denominator_band, "fit": fit })
        }
        Err(e) => {
            log.event("trend_skipped", &[("series", &name), ("reason", &e)]);
            json!({ "series": name, "band": band, "denominator_band": denominator_band, "fit": null })
        }
    }
}

pub fn synth(cfg: &RunConfig, log: &mut RunLog) -> CliResult<Written> {
    let model = match &cfg.synth.model {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            VarModel::from_json(&text).context(|| path.display().to_string())?
        }
        None => builtin_model(cfg.synth.k),
    };
    let panel = synth_var_panel(&model, cfg.synth.length, cfg.seed).context(|| "simulation".to_string())?;
    log.event(
        "synth",
        &[("k", &model.k()), ("lags", &model.p()), ("length", &panel.len()), ("seed", &cfg.seed)],
    );
    let report = report(cfg, &model)?;
    report.log(log);
    let mut truth = report.json();
    truth["model"] = serde_json::from_str(&model.to_json().context(|| "model".to_string())?)
        .expect("model JSON parses");
    truth["seed"] = json!(cfg.seed);
    truth["length"] = json!(cfg.synth.length);
    truth["horizon"] = json!(cfg.connect.htrunc);
    truth["n_freq"] = json!(cfg.connect.nfreq);
    write_with(cfg, Path::new("panel.csv"), |w| write_panel_csv(&panel, w))?;
    write_json(cfg, Path::new("truth.json"), &truth)?;
    Ok(vec!["panel.csv".into(), "truth.json".into()])
}

/// Stable VAR(2) used by `synth` when no model file is given: own lag 0.4,
/// 0.1 spillover from each ring neighbour, 0.1 at lag two, and innovations
/// with correlation 0.3.
pub fn builtin_model(k: usize) -> VarModel {
    let phi1 = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            0.4
        } else if j == (i + 1) % k || j == (i + k - 1) % k {
            0.1
        } else {
            0.0
        }
    });
    let phi2 = DMatrix::identity(k, k) * 0.1;
    let sigma = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.3 });
    VarModel::new(None, vec![phi1, phi2], sigma, VarModel::default_names(k)).expect("built-in model is valid")
}

fn symbols_for(cfg: &RunConfig) -> CliResult<Vec<String>> {
    let inputs = &cfg.data.inputs;
    let symbols: Vec<String> = if cfg.data.symbols.is_empty() {
        inputs
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| CliError::usage(format!("cannot derive a symbol from {}", p.display())))
            })
            .collect::<CliResult<_>>()?
    } else if cfg.data.symbols.len() == inputs.len() {
        cfg.data.symbols.clone()
    } else {
        return Err(CliError::usage(format!(
            "{} symbols given for {} tick files",
            cfg.data.symbols.len(),
            inputs.len()
        )));
    };
    if let Some(bad) = symbols
        .iter()
        .find(|s| s.is_empty() || s.contains(['/', '\\', ',']))
    {
        return Err(CliError::usage(format!("symbol `{bad}` cannot be used as a column or file name")));
    }
    let mut sorted = symbols.clone();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::usage("symbols must be distinct"));
    }
    Ok(symbols)
}

fn session(cfg: &RunConfig) -> CliResult<Session> {
    let parse = |s: &str| {
        NaiveTime::parse_from_str(s, "%H:%M")
            .map_err(|_| CliError::usage(format!("session time `{s}` is not HH:MM")))
    };
    let start = parse(&cfg.rv.session_start)?;
    let end = match cfg.rv.session_end.as_str() {
        "24:00" => None,
        s => Some(parse(s)?),
    };
    Session::from_times(start, end).context(|| "session".to_string())
}

fn read_panel(cfg: &RunConfig) -> CliResult<VolatilityPanel> {
    let [path] = cfg.data.inputs.as_slice() else {
        return Err(CliError::usage(format!(
            "expected exactly one panel CSV, got {}",
            cfg.data.inputs.len()
        )));
    };
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_panel_csv(BufReader::new(file), cfg.data.transform).context(|| path.display().to_string())
}

fn write_daily_csv<W: Write>(series: &[(NaiveDate, f64)], mut w: W) -> spillover::Result<()> {
    writeln!(w, "date,bpv")?;
    for (date, bpv) in series {
        writeln!(w, "{},{bpv}", date.format("%Y-%m-%d"))?;
    }
    w.flush()?;
    Ok(())
}

type RatioSeries<'a> = (&'a str, Vec<(NaiveDate, Option<f64>)>);

fn write_ratios<W: Write>(
    rows: &[RatioSeries<'_>],
    numerator_band: &str,
    denominator_band: &str,
    mut w: W,
) -> spillover::Result<()> {
    writeln!(w, "date,measure,numerator_band,denominator_band,ratio")?;
    for (measure, series) in rows {
        for (date, ratio) in series {
            let value = ratio.map_or_else(String::new, |r| r.to_string());
            writeln!(
                w,
                "{},{measure},{numerator_band},{denominator_band},{value}",
                date.format("%Y-%m-%d")
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_with(
    cfg: &RunConfig,
    name: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> spillover::Result<()>,
) -> CliResult<()> {
    let path = cfg.out_dir().join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).context(|| path.display().to_string())?;
    w.flush().map_err(|e| CliError::io(&path, e))
}

fn write_text(cfg: &RunConfig, name: &Path, text: &str) -> CliResult<()> {
    let path = cfg.out_dir().join(name);
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn write_json(cfg: &RunConfig, name: &Path, value: &serde_json::Value) -> CliResult<()> {
    write_text(cfg, name, &serde_json::to_string_pretty(value).expect("JSON values serialize"))
}

