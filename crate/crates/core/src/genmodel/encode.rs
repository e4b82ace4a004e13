//! Maps a variable's unrolled parents onto design-matrix columns.
//!
//! Cell values are stored as `f64`: continuous values directly, categorical
//! values as the index of their level. Continuous parents pass through,
//! ordinal categoricals enter as their numeric label, nominal categoricals are
//! one-hot encoded with the first level dropped.

use crate::graph::{CausalGraph, UnrolledParents, VariableKind};

#[derive(Debug, Clone)]
enum Part {
    Numeric { var: usize, lag: bool, values: Option<Vec<f64>> },
    OneHot { var: usize, lag: bool, width: usize },
}

#[derive(Debug, Clone)]
pub struct Encoder {
    names: Vec<String>,
    parts: Vec<Part>,
}

fn lag_name(name: &str, lag: bool) -> String {
    if lag {
        format!("{name}[t-1]")
    } else {
        name.to_string()
    }
}

impl Encoder {
    pub fn new(graph: &CausalGraph, parents: &UnrolledParents) -> Self {
        let mut names = Vec::new();
        let mut parts = Vec::new();
        for p in &parents.parents {
            let var = graph.index_of(&p.name).expect("parents come from the graph");
            let spec = &graph.variables[var];
            let lag = p.offset == -1;
            let base = lag_name(&spec.name, lag);
            match &spec.kind {
                VariableKind::Continuous => {
                    names.push(base);
                    parts.push(Part::Numeric { var, lag, values: None });
                }
                VariableKind::Categorical { levels, ordinal: true } => {
                    names.push(base);
                    let values = levels.iter().map(|l| l.parse().expect("validated ordinal")).collect();
                    parts.push(Part::Numeric { var, lag, values: Some(values) });
                }
                VariableKind::Categorical { levels, ordinal: false } => {
                    for l in &levels[1..] {
                        names.push(format!("{base}={l}"));
                    }
                    parts.push(Part::OneHot { var, lag, width: levels.len() - 1 });
                }
            }
        }
        Self { names, parts }
    }

    /// Encoder for `child` at step `t` of `graph`.
    pub fn for_variable(graph: &CausalGraph, child: &str, t: usize) -> Self {
        let parents = graph.parents_at(child, t).expect("declared variable");
        Self::new(graph, &parents)
    }

    /// Feature names, excluding the intercept.
    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    /// Column names of the full design, intercept first.
    pub fn column_names(&self) -> Vec<String> {
        let mut v = Vec::with_capacity(self.names.len() + 1);
        v.push(crate::fitkit::INTERCEPT.to_string());
        v.extend(self.names.iter().cloned());
        v
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// Appends the encoded features (no intercept) for one step. `lag` holds
    /// the previous step's values and is required iff the encoder has a
    /// self-lag part.
    pub fn encode_into(&self, current: &[f64], lag: Option<&[f64]>, out: &mut Vec<f64>) {
        for part in &self.parts {
            match part {
                Part::Numeric { var, lag: is_lag, values } => {
                    let src = if *is_lag { lag.expect("lagged values") } else { current };
                    let v = src[*var];
                    out.push(match values {
                        Some(map) => map[v as usize],
                        None => v,
                    });
                }
                Part::OneHot { var, lag: is_lag, width } => {
                    let src = if *is_lag { lag.expect("lagged values") } else { current };
                    let level = src[*var] as usize;
                    for k in 1..=*width {
                        out.push(if level == k { 1.0 } else { 0.0 });
                    }
                }
            }
        }
    }

    pub fn features(&self, current: &[f64], lag: Option<&[f64]>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        self.encode_into(current, lag, &mut out);
        out
    }

    /// Features with the leading intercept, ready for model evaluation.
    pub fn row(&self, current: &[f64], lag: Option<&[f64]>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width() + 1);
        out.push(1.0);
        self.encode_into(current, lag, &mut out);
        out
    }

    /// Variables (graph indices) read by this encoder at the same step.
    pub fn same_time_inputs(&self) -> impl Iterator<Item = usize> + '_ {
        self.parts.iter().filter_map(|p| match p {
            Part::Numeric { var, lag: false, .. } | Part::OneHot { var, lag: false, .. } => Some(*var),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn tau_columns() {
        let g = reference::default_graph();
        let e = Encoder::for_variable(&g, "Tau", 2);
        assert_eq!(
            e.feature_names(),
            &[
                "Z=1",
                "Race=Asian",
                "Race=Black",
                "Race=Hawaiian/Other PI",
                "Race=More than one",
                "Race=Unknown",
                "Race=White",
                "APOE4",
                "Tau[t-1]",
            ]
        );
        let mut cur = vec![0.0; g.variables.len()];
        let prev = {
            let mut p = cur.clone();
            p[g.index_of("Tau").unwrap()] = 250.0;
            p
        };
        cur[g.index_of("Z").unwrap()] = 1.0;
        cur[g.index_of("Race").unwrap()] = 2.0;
        cur[g.index_of("APOE4").unwrap()] = 2.0;
        assert_eq!(
            e.row(&cur, Some(&prev)),
            vec![1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 250.0]
        );
    }

    #[test]
    fn ordinal_uses_numeric_label() {
        let g = reference::default_graph();
        let e = Encoder::for_variable(&g, "ADAS13", 0);
        let edu = g.index_of("Education").unwrap();
        let pos = e.feature_names().iter().position(|n| n == "Education").unwrap();
        let mut cur = vec![0.0; g.variables.len()];
        cur[edu] = 4.0; // level "12"
        assert_eq!(e.features(&cur, None)[pos], 12.0);
    }
}
