//! Regenerates the synthetic data bundled under `data/`.
//!
//! - `sse_returns.csv`: one index, 2452 business days. Extreme days come from
//!   a bar-discretized bivariate linear model (up = type 0, down = type 1);
//!   other days are Gaussian noise.
//! - `consumer_returns.csv`, `medical_returns.csv`, `financial_returns.csv`:
//!   three sectors driven jointly by a six-type floored model (types 0-2 up,
//!   3-5 down, sector order consumer, medical, financial).
//! - `sectors_events.csv`: 25000 bars of the six-type model itself, with a
//!   sidecar giving horizon and type count.
//! - `bivariate_model.json`, `sectors_model.json`: the generating models.
//!
//! Usage: `cargo run --example make_fixtures [-- <output dir>]`.

use std::path::PathBuf;

use chrono::{Datelike, NaiveDate, Weekday};
use contagion::events::events_to_csv;
use contagion::model::{EventSequence, HawkesModel, LinkSpec};
use contagion::rng::{derive_seed, Prng};
use contagion::simulate::simulate_bars;
use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;

pub const SEED: u64 = 20150601;
pub const DAYS: usize = 2452;
pub const SECTOR_BARS: usize = 25_000;

pub fn bivariate_model() -> HawkesModel {
    HawkesModel::linear(
        vec![0.024, 0.044],
        vec![vec![0.382, 0.387], vec![0.218, 0.343]],
        0.1,
    )
    .expect("valid model")
}

pub fn sectors_model() -> HawkesModel {
    HawkesModel::nonlinear(
        vec![-0.226, -0.200, -0.341, -0.079, -0.024, -0.095],
        vec![
            vec![1.161, 0.240, 0.253, -0.335, -0.469, -0.154],
            vec![0.157, 1.143, -0.238, -0.230, -0.173, -0.208],
            vec![-0.105, -0.298, 1.313, -0.371, -0.474, -0.425],
            vec![0.109, 0.093, 0.002, 0.671, 0.420, -0.067],
            vec![0.037, -0.191, -0.005, 0.460, 0.831, 0.078],
            vec![-0.366, -0.100, -0.136, 0.071, 0.033, 1.092],
        ],
        0.702,
        LinkSpec::floored(),
    )
    .expect("valid model")
}

fn business_days(n: usize) -> Vec<NaiveDate> {
    let mut day = NaiveDate::from_ymd_opt(2014, 1, 2).expect("valid date");
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day.succ_opt().expect("date in range");
    }
    out
}

fn normal(rng: &mut Prng) -> f64 {
    let u: f64 = Open01.sample(rng);
    let v: f64 = Open01.sample(rng);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn exp1(rng: &mut Prng) -> f64 {
    let u: f64 = Open01.sample(rng);
    -u.ln()
}

/// Returns in percent: up days `1.5 + Exp(1)`, down days `-(1.5 + Exp(1))`,
/// otherwise `0.8 N(0, 1)`. A day marked both ways counts as up.
fn returns_csv(seq: &EventSequence, up: usize, down: usize, seed: u64) -> String {
    let mut rng = Prng::seed_from_u64(seed);
    let days = business_days(seq.horizon() as usize);
    let mut kind = vec![0i8; days.len()];
    for e in seq.events() {
        let i = e.time as usize;
        if e.mark == down && kind[i] == 0 {
            kind[i] = -1;
        }
        if e.mark == up {
            kind[i] = 1;
        }
    }
    let mut out = String::from("date,return_pct\n");
    for (day, k) in days.iter().zip(kind) {
        let r = match k {
            1 => 1.5 + exp1(&mut rng),
            -1 => -1.5 - exp1(&mut rng),
            _ => 0.8 * normal(&mut rng),
        };
        out.push_str(&format!("{day},{r:.4}\n"));
    }
    out
}

/// `(file name, contents)` of every fixture.
pub fn fixture_files() -> Vec<(String, String)> {
    let mut files = Vec::new();

    let biv = bivariate_model();
    let sse = simulate_bars(&biv, DAYS, derive_seed(SEED, "sse")).expect("simulation");
    files.push((
        "sse_returns.csv".to_string(),
        returns_csv(&sse, 0, 1, derive_seed(SEED, "sse-noise")),
    ));

    let sectors = sectors_model();
    let joint = simulate_bars(&sectors, DAYS, derive_seed(SEED, "sectors-daily")).expect("simulation");
    for (s, name) in ["consumer", "medical", "financial"].iter().enumerate() {
        files.push((
            format!("{name}_returns.csv"),
            returns_csv(&joint, s, 3 + s, derive_seed(SEED, name)),
        ));
    }

    let long = simulate_bars(&sectors, SECTOR_BARS, derive_seed(SEED, "sectors-long")).expect("simulation");
    files.push(("sectors_events.csv".to_string(), events_to_csv(&long)));
    files.push((
        "sectors_events.csv.meta.json".to_string(),
        format!(
            "{}\n",
            serde_json::to_string_pretty(&serde_json::json!({
                "horizon": long.horizon(),
                "num_types": long.num_types(),
                "seed": SEED,
            }))
            .expect("json")
        ),
    ));
    files.push(("bivariate_model.json".to_string(), format!("{}\n", biv.to_json())));
    files.push(("sectors_model.json".to_string(), format!("{}\n", sectors.to_json())));
    files
}

#[allow(dead_code)]
fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    std::fs::create_dir_all(&dir)?;
    for (name, contents) in fixture_files() {
        std::fs::write(dir.join(&name), contents)?;
        println!("wrote {}", dir.join(&name).display());
    }
    Ok(())
}
