use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{write_file, Taxonomy};
use crate::error::{Error, Result};

/// JSON companion of an NPY label array:
/// `{"timestamps": ["2017-04-01T13:00:00Z", ...]}` plus optional extras.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub timestamps: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<Taxonomy>,
    /// Forecast origin, present on forecast outputs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl Sidecar {
    pub fn new(timestamps: &[DateTime<Utc>], taxonomy: Option<Taxonomy>) -> Self {
        Sidecar {
            timestamps: timestamps.iter().map(format_timestamp).collect(),
            taxonomy,
            origin: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("sidecar serializes");
        text.push('\n');
        write_file(path, text.as_bytes())
    }

    pub fn parsed_timestamps(&self) -> Result<Vec<DateTime<Utc>>> {
        self.timestamps.iter().map(|s| parse_timestamp(s)).collect()
    }

    pub fn parsed_origin(&self) -> Result<Option<DateTime<Utc>>> {
        self.origin.as_deref().map(parse_timestamp).transpose()
    }
}

/// ISO-8601 UTC with a trailing `Z`, second precision.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::Timestamps(format!("cannot parse {s:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn timestamp_format_is_zulu_seconds() {
        let t = Utc.with_ymd_and_hms(2017, 4, 1, 13, 0, 0).unwrap();
        assert_eq!(format_timestamp(&t), "2017-04-01T13:00:00Z");
        assert_eq!(parse_timestamp("2017-04-01T15:00:00+02:00").unwrap(), t);
    }

    #[test]
    fn plain_sidecar_parses() {
        let s: Sidecar = serde_json::from_str(r#"{"timestamps": ["2017-04-01T13:00:00Z"]}"#).unwrap();
        assert_eq!(s.taxonomy, None);
        assert_eq!(s.parsed_timestamps().unwrap().len(), 1);
    }
}
