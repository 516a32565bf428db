//! On-disk formats: the TOML market file, the CSV market table and the TOML
//! experiment configuration. All carry or imply `schema_version = 1`.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::model::{Market, MarketData, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarketFile {
    schema_version: u32,
    num_goods: usize,
    markets: Vec<Market>,
    #[serde(default)]
    counterfactuals: Vec<RawCounterfactual>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCounterfactual {
    name: String,
    delta: Vec<f64>,
}

/// Observed markets plus named counterfactual scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketFile {
    pub data: MarketData,
    pub scenarios: Vec<(String, Scenario)>,
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Parses a market file:
///
/// ```toml
/// schema_version = 1
/// num_goods = 2
///
/// [[markets]]
/// delta = [1.0, 0.0]
/// share = [0.6, 0.4]
///
/// [[counterfactuals]]
/// name = "p1_up"
/// delta = [0.9, 0.0]
/// ```
pub fn parse_market_file(text: &str) -> Result<MarketFile> {
    let raw: RawMarketFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    check_schema(raw.schema_version)?;
    let data = MarketData::new(raw.num_goods, raw.markets)?;
    let scenarios = parse_scenarios(raw.counterfactuals, data.num_goods())?;
    Ok(MarketFile { data, scenarios })
}

fn parse_scenarios(raw: Vec<RawCounterfactual>, num_goods: usize) -> Result<Vec<(String, Scenario)>> {
    let mut out: Vec<(String, Scenario)> = Vec::with_capacity(raw.len());
    for cf in raw {
        if out.iter().any(|(n, _)| *n == cf.name) {
            return Err(Error::Parse(format!("duplicate counterfactual name `{}`", cf.name)));
        }
        let scen = Scenario::new(cf.delta, num_goods).map_err(|e| {
            Error::Parse(format!("counterfactual `{}`: {e}", cf.name))
        })?;
        out.push((cf.name, scen));
    }
    Ok(out)
}

/// Parses a market table with columns `market_id, delta_1..delta_J, share_1..share_J`.
///
/// Rows are taken in file order; `market_id` is informational.
pub fn parse_markets_csv(text: &str) -> Result<MarketData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("market table header: {e}")))?
        .clone();
    let cols = headers.len();
    if cols < 3 || (cols - 1) % 2 != 0 {
        return Err(Error::Parse(format!(
            "market table needs market_id plus J delta and J share columns, found {cols} columns"
        )));
    }
    let j = (cols - 1) / 2;
    let expected: Vec<String> = std::iter::once("market_id".to_string())
        .chain((1..=j).map(|g| format!("delta_{g}")))
        .chain((1..=j).map(|g| format!("share_{g}")))
        .collect();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "market table header must be `{}`",
            expected.join(",")
        )));
    }

    let mut markets = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let values = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, v)| {
                v.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {line}, field {}: {e}", expected[c]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        markets.push(Market::new(values[..j].to_vec(), values[j..].to_vec()));
    }
    MarketData::new(j, markets)
}

/// Parses a counterfactual given as `name=d1,d2,...,dJ`.
pub fn parse_scenario_arg(arg: &str, num_goods: usize) -> Result<(String, Scenario)> {
    let (name, values) = arg
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("counterfactual `{arg}` must look like name=d1,...,dJ")))?;
    let delta = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("counterfactual `{name}`: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut parsed = parse_scenarios(
        vec![RawCounterfactual {
            name: name.trim().to_string(),
            delta,
        }],
        num_goods,
    )?;
    Ok(parsed.remove(0))
}

/// Parses an experiment configuration. Every field except `schema_version`
/// falls back to [`ExperimentConfig::default`].
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let version = match table.remove("schema_version") {
        Some(toml::Value::Integer(v)) => u32::try_from(v).unwrap_or(u32::MAX),
        Some(other) => {
            return Err(Error::Parse(format!("schema_version must be an integer, found {other}")))
        }
        None => return Err(Error::Parse("missing field `schema_version`".into())),
    };
    check_schema(version)?;
    let config: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
