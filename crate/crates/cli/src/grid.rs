//! Parameter grid specifications: inclusive linear ranges parsed from
//! `name=start:stop:steps` plus fixed value lists for set-valued
//! defaults.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Range { start: f64, stop: f64, steps: usize },
    List(Vec<f64>),
}

impl GridSpec {
    pub fn range(start: f64, stop: f64, steps: usize) -> Self {
        GridSpec::Range { start, stop, steps }
    }

    /// Inclusive linspace; a single step collapses to the start point.
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Range { start, stop, steps } => {
                if *steps == 1 {
                    return vec![*start];
                }
                let span = stop - start;
                (0..*steps)
                    .map(|i| start + span * (i as f64 / (*steps - 1) as f64))
                    .collect()
            }
            GridSpec::List(values) => values.clone(),
        }
    }

    /// Metadata echo in the same shape the flag accepts.
    pub fn echo(&self) -> String {
        match self {
            GridSpec::Range { start, stop, steps } => format!("{start}:{stop}:{steps}"),
            GridSpec::List(values) => {
                let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                format!("{{{}}}", joined.join(","))
            }
        }
    }
}

/// Applies `--grid name=start:stop:steps` overrides to the command's
/// default grids. Unknown names, repeats, and malformed ranges are
/// config errors.
pub fn apply_overrides(
    defaults: &mut BTreeMap<&'static str, GridSpec>,
    overrides: &[String],
    degrees: bool,
) -> Result<(), String> {
    let mut seen: Vec<&str> = Vec::new();
    for spec in overrides {
        let (name, range) = spec
            .split_once('=')
            .ok_or_else(|| format!("grid `{spec}` is not name=start:stop:steps"))?;
        if !defaults.keys().any(|key| *key == name) {
            let known: Vec<&str> = defaults.keys().copied().collect();
            return Err(format!(
                "unknown grid parameter `{name}`; expected one of {known:?}"
            ));
        }
        let slot = defaults
            .iter_mut()
            .find(|(key, _)| **key == name)
            .map(|(_, value)| value)
            .expect("key presence checked above");
        if seen.contains(&name) {
            return Err(format!("grid parameter `{name}` given twice"));
        }
        seen.push(name);
        *slot = parse_range(range, degrees)
            .map_err(|reason| format!("grid `{name}`: {reason}"))?;
    }
    Ok(())
}

fn parse_range(text: &str, degrees: bool) -> Result<GridSpec, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("`{text}` is not start:stop:steps"));
    }
    let mut start: f64 = parts[0]
        .parse()
        .map_err(|_| format!("start `{}` is not a number", parts[0]))?;
    let mut stop: f64 = parts[1]
        .parse()
        .map_err(|_| format!("stop `{}` is not a number", parts[1]))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| format!("steps `{}` is not a positive integer", parts[2]))?;
    if degrees {
        start = start.to_radians();
        stop = stop.to_radians();
    }
    if !start.is_finite() || !stop.is_finite() {
        return Err("bounds must be finite".to_string());
    }
    if steps < 1 {
        return Err("steps must be at least 1".to_string());
    }
    if start > stop {
        return Err(format!("start {start} exceeds stop {stop}"));
    }
    Ok(GridSpec::range(start, stop, steps))
}
