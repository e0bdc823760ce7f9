//! Airline-style raw data and its preprocessing into a regression store.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harness::population::{format_field, write_sidecar};
use crate::line_store::ByteAddressedFile;
use crate::rng::StreamRng;

/// Header of the raw CSV.
pub const RAW_COLUMNS: [&str; 6] = ["Year", "Month", "DayofMonth", "DayOfWeek", "DepTime", "ArrDelay"];

/// Columns of the preprocessed store: log delay, three departure-time
/// dummies (morning base) and six weekday dummies (Monday base).
pub const FLIGHTS_COLUMNS: [&str; 10] = [
    "y", "d_aft", "d_eve", "d_mid", "dow2", "dow3", "dow4", "dow5", "dow6", "dow7",
];

/// Parameters of the synthetic raw generator. Positive delays follow
/// `log(delay) = intercept + bin effect + weekday effect + noise`, then are
/// rounded up to whole minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightsParams {
    pub intercept: f64,
    /// Afternoon, evening, midnight effects relative to morning.
    pub bin_effects: [f64; 3],
    /// Tuesday..Sunday effects relative to Monday.
    pub dow_effects: [f64; 6],
    pub noise_sd: f64,
    /// Share of rows with a negative (early) arrival.
    pub early_share: f64,
    /// Share of rows with a missing delay.
    pub missing_share: f64,
    pub year: u16,
}

impl Default for FlightsParams {
    fn default() -> Self {
        FlightsParams {
            intercept: 2.04,
            bin_effects: [0.22, 0.46, 0.59],
            dow_effects: [-0.06, 0.03, 0.12, 0.10, -0.10, 0.02],
            noise_sd: 1.0,
            early_share: 0.45,
            missing_share: 0.01,
            year: 2008,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepartureBin {
    Morning,
    Afternoon,
    Evening,
    Midnight,
}

/// Bin an `hhmm` departure time (`1330`, `"13:30"`; `2400` is midnight).
/// Morning is [07:00, 12:00), afternoon [12:00, 18:00), evening
/// [18:00, 24:00), midnight [00:00, 07:00).
pub fn departure_bin(hhmm: &str) -> Option<DepartureBin> {
    let s = hhmm.trim();
    let (h, m) = match s.split_once(':') {
        Some((h, m)) => (h.parse::<u32>().ok()?, m.parse::<u32>().ok()?),
        None => {
            let v = s.parse::<f64>().ok()?;
            if v.fract() != 0.0 || v < 0.0 {
                return None;
            }
            let v = v as u32;
            (v / 100, v % 100)
        }
    };
    if m >= 60 || h > 24 || (h == 24 && m != 0) {
        return None;
    }
    Some(match h {
        7..=11 => DepartureBin::Morning,
        12..=17 => DepartureBin::Afternoon,
        18..=23 => DepartureBin::Evening,
        _ => DepartureBin::Midnight,
    })
}

fn sample_departure(rng: &mut StreamRng) -> u32 {
    // Most traffic between 06:00 and 22:00.
    let minute = if rng.random::<f64>() < 0.9 {
        rng.random_range(360..1320)
    } else {
        rng.random_range(0..1440)
    };
    let hhmm = (minute / 60) * 100 + minute % 60;
    if hhmm == 0 {
        2400
    } else {
        hhmm
    }
}

/// Write `rows` raw rows with a header line.
pub fn generate_flights_raw(params: &FlightsParams, rows: u64, mut rng: StreamRng, path: &Path) -> Result<()> {
    let mut w = BufWriter::with_capacity(256 * 1024, File::create(path)?);
    writeln!(w, "{}", RAW_COLUMNS.join(","))?;
    for _ in 0..rows {
        let month: u32 = rng.random_range(1..=12);
        let day: u32 = rng.random_range(1..=28);
        let dow: usize = rng.random_range(1..=7);
        let dep = sample_departure(&mut rng);
        let u: f64 = rng.random();
        let delay = if u < params.missing_share {
            "NA".to_string()
        } else if u < params.missing_share + params.early_share {
            format!("-{}", rng.random_range(1..=45u32))
        } else {
            let bin = match departure_bin(&dep.to_string()).expect("valid time") {
                DepartureBin::Morning => 0.0,
                DepartureBin::Afternoon => params.bin_effects[0],
                DepartureBin::Evening => params.bin_effects[1],
                DepartureBin::Midnight => params.bin_effects[2],
            };
            let dow_eff = if dow == 1 { 0.0 } else { params.dow_effects[dow - 2] };
            let z: f64 = rng.sample(StandardNormal);
            let log_delay = params.intercept + bin + dow_eff + params.noise_sd * z;
            format!("{}", log_delay.exp().ceil().max(1.0) as u64)
        };
        writeln!(w, "{},{month},{day},{dow},{dep},{delay}", params.year)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PreprocessSummary {
    pub kept: u64,
    /// Negative or zero delays.
    pub dropped_nonpositive: u64,
    /// `NA` or empty delay or departure time.
    pub missing: u64,
    pub unparseable: u64,
}

fn is_missing(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

/// Turn a raw CSV (with header) into the regression store
/// `y,d_aft,d_eve,d_mid,dow2..dow7` plus a sidecar.
pub fn preprocess_flights(raw: &Path, out: &Path) -> Result<(ByteAddressedFile, PreprocessSummary)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(raw)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Malformed(format!("raw flights file has no {name} column")))
    };
    let (c_dow, c_dep, c_delay) = (col("DayOfWeek")?, col("DepTime")?, col("ArrDelay")?);

    let mut w = BufWriter::with_capacity(256 * 1024, File::create(out)?);
    let mut summary = PreprocessSummary::default();
    let mut line = String::with_capacity(64);
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record)? {
        let (Some(dow), Some(dep), Some(delay)) = (record.get(c_dow), record.get(c_dep), record.get(c_delay)) else {
            summary.unparseable += 1;
            continue;
        };
        if is_missing(delay) || is_missing(dep) {
            summary.missing += 1;
            continue;
        }
        let Ok(delay) = delay.trim().parse::<f64>() else {
            summary.unparseable += 1;
            continue;
        };
        let (Some(bin), Ok(dow @ 1..=7)) = (departure_bin(dep), dow.trim().parse::<u8>()) else {
            summary.unparseable += 1;
            continue;
        };
        if !(delay > 0.0) {
            summary.dropped_nonpositive += 1;
            continue;
        }
        line.clear();
        format_field(&mut line, delay.ln());
        for b in [DepartureBin::Afternoon, DepartureBin::Evening, DepartureBin::Midnight] {
            line.push_str(if bin == b { ",1" } else { ",0" });
        }
        for d in 2..=7 {
            line.push_str(if dow == d { ",1" } else { ",0" });
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
        summary.kept += 1;
    }
    w.flush()?;
    drop(w);
    write_sidecar(
        out,
        &[
            ("columns", FLIGHTS_COLUMNS.join(",")),
            ("rows", summary.kept.to_string()),
            ("response", "log(ArrDelay)".into()),
            ("departure_base", "morning".into()),
            ("weekday_base", "Monday".into()),
            ("dropped_nonpositive", summary.dropped_nonpositive.to_string()),
            ("missing", summary.missing.to_string()),
            ("unparseable", summary.unparseable.to_string()),
        ],
    )?;
    Ok((ByteAddressedFile::open(out)?, summary))
}
