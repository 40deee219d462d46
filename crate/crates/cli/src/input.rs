//! CSV ingestion.
//!
//! Header required: `user_id,item_id,polarity,value[,scale_min,scale_max]`.
//! Missing scale columns default to the 0-100 VAS range.

use std::collections::BTreeMap;
use std::path::Path;

use rprofile_core::pipeline::{Polarity, ResponseRecord};

use crate::CliError;

pub const DEFAULT_SCALE: (f64, f64) = (0.0, 100.0);

struct Columns {
    user_id: usize,
    item_id: usize,
    polarity: usize,
    value: usize,
    scale_min: Option<usize>,
    scale_max: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self, CliError> {
        let find = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        let need = |name: &str| find(name).ok_or_else(|| CliError::Input(format!("missing column '{name}'")));
        Ok(Self {
            user_id: need("user_id")?,
            item_id: need("item_id")?,
            polarity: need("polarity")?,
            value: need("value")?,
            scale_min: find("scale_min"),
            scale_max: find("scale_max"),
        })
    }
}

fn parse_polarity(s: &str) -> Option<Polarity> {
    match s.trim().to_ascii_lowercase().as_str() {
        "unipolar" => Some(Polarity::Unipolar),
        "bipolar" => Some(Polarity::Bipolar),
        _ => None,
    }
}

/// Records grouped by user, in file order within each user.
pub fn read_records(path: &Path) -> Result<BTreeMap<String, Vec<ResponseRecord>>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_records(file)
}

pub fn parse_records<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, Vec<ResponseRecord>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Input(format!("header: {e}")))?.clone();
    let cols = Columns::from_header(&header)?;

    let mut users: BTreeMap<String, Vec<ResponseRecord>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| {
            row.get(i).filter(|s| !s.is_empty()).ok_or_else(|| CliError::Input(format!("row {line}: column '{name}' is empty")))
        };
        let number = |i: usize, name: &str| -> Result<f64, CliError> {
            let raw = field(i, name)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Input(format!("row {line}: column '{name}': '{raw}' is not a finite number")))
        };
        let optional = |i: Option<usize>, name: &str, default: f64| -> Result<f64, CliError> {
            match i {
                Some(i) if row.get(i).is_some_and(|s| !s.is_empty()) => number(i, name),
                _ => Ok(default),
            }
        };

        let polarity_raw = field(cols.polarity, "polarity")?;
        let polarity = parse_polarity(polarity_raw).ok_or_else(|| {
            CliError::Input(format!("row {line}: column 'polarity': '{polarity_raw}' is not unipolar or bipolar"))
        })?;
        let value = number(cols.value, "value")?;
        let scale_min = optional(cols.scale_min, "scale_min", DEFAULT_SCALE.0)?;
        let scale_max = optional(cols.scale_max, "scale_max", DEFAULT_SCALE.1)?;
        if scale_min >= scale_max {
            return Err(CliError::Input(format!("row {line}: scale_min {scale_min} is not below scale_max {scale_max}")));
        }
        if value < scale_min || value > scale_max {
            return Err(CliError::Input(format!(
                "row {line}: column 'value': {value} is outside the scale [{scale_min}, {scale_max}]"
            )));
        }
        let user_id = field(cols.user_id, "user_id")?.to_string();
        users.entry(user_id.clone()).or_default().push(ResponseRecord {
            user_id,
            item_id: field(cols.item_id, "item_id")?.to_string(),
            polarity,
            raw_value: value,
            scale_min,
            scale_max,
        });
    }
    if users.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }
    Ok(users)
}
