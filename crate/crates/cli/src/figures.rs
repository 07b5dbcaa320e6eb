//! Built-in sweep configs, one per reproducible figure panel.

use crate::config::{Loaded, SweepConfig};
use crate::error::{CliError, Result};

macro_rules! figure {
    ($id:literal) => {
        ($id, include_str!(concat!("../../../figures/", $id, ".toml")))
    };
}

pub const FIGURES: [(&str, &str); 12] = [
    figure!("fig2a"),
    figure!("fig2b"),
    figure!("fig2c"),
    figure!("fig2d"),
    figure!("fig2e"),
    figure!("fig2f"),
    figure!("fig3a"),
    figure!("fig3b"),
    figure!("figS0"),
    figure!("figS1"),
    figure!("figS2"),
    figure!("figS2a"),
];

pub fn ids() -> impl Iterator<Item = &'static str> {
    FIGURES.iter().map(|(id, _)| *id)
}

pub fn source(id: &str) -> Option<&'static str> {
    FIGURES.iter().find(|(k, _)| *k == id).map(|(_, text)| *text)
}

pub fn load(id: &str) -> Result<Loaded> {
    let text = source(id).ok_or_else(|| {
        CliError::config("<figure-id>", format!("unknown figure `{id}` (known: {})", ids().collect::<Vec<_>>().join(", ")))
    })?;
    SweepConfig::from_toml_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_figure_parses_cleanly() {
        for id in ids() {
            let loaded = load(id).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert!(loaded.warnings.is_empty(), "{id}: {:?}", loaded.warnings);
            assert_eq!(loaded.config.figure.as_deref(), Some(id));
        }
    }

    #[test]
    fn unknown_id_is_a_config_error() {
        assert_eq!(load("fig9z").unwrap_err().exit_code(), 2);
    }
}
