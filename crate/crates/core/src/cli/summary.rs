//! Machine-readable run summary (`summary.json`).

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// Bumped on any incompatible change of the summary layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit-code contract shared by all subcommands.
pub mod exit {
    pub const OK: i32 = 0;
    pub const BOUNDARY: i32 = 1;
    pub const VIOLATED: i32 = 2;
    pub const USAGE: i32 = 64;
    pub const FAILURE: i32 = 70;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Boundary,
    Violated,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => exit::OK,
            Status::Boundary => exit::BOUNDARY,
            Status::Violated => exit::VIOLATED,
            Status::Failed => exit::FAILURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

/// A built-in check `value relation bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn new(name: &str, value: f64, relation: Relation, bound: f64) -> Self {
        let passed = match relation {
            Relation::Lt => value < bound,
            Relation::Le => value <= bound,
            Relation::Gt => value > bound,
            Relation::Ge => value >= bound,
        };
        Assertion { name: name.into(), value, relation, bound, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub status: Status,
    pub exit_code: i32,
    pub seed: u64,
    pub threads: Option<usize>,
    pub failing_stage: Option<String>,
    pub error: Option<String>,
    pub assertions: Vec<Assertion>,
    pub results: BTreeMap<String, Value>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn new(command: &str, seed: u64, threads: Option<usize>) -> Self {
        Summary {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            status: Status::Ok,
            exit_code: exit::OK,
            seed,
            threads,
            failing_stage: None,
            error: None,
            assertions: Vec::new(),
            results: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.results.insert(key.into(), v);
    }

    pub fn check(&mut self, name: &str, value: f64, relation: Relation, bound: f64) -> bool {
        let a = Assertion::new(name, value, relation, bound);
        let passed = a.passed;
        self.assertions.push(a);
        passed
    }

    pub fn fail(&mut self, stage: &str, error: impl ToString) {
        self.failing_stage = Some(stage.into());
        self.error = Some(error.to_string());
        self.status = Status::Failed;
    }

    /// Fixes the status: any failed assertion turns an `ok` run into `failed`.
    pub fn finalize(&mut self) {
        if self.status == Status::Ok {
            if let Some(a) = self.assertions.iter().find(|a| !a.passed) {
                self.failing_stage = Some(format!("assertion {}", a.name));
                self.status = Status::Failed;
            }
        }
        self.exit_code = self.status.exit_code();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_assertion_fails_run() {
        let mut s = Summary::new("solve", 1, None);
        assert!(s.check("a", 1.0, Relation::Le, 2.0));
        assert!(!s.check("b", 1.0, Relation::Lt, 1.0));
        s.finalize();
        assert_eq!((s.status, s.exit_code), (Status::Failed, exit::FAILURE));
        assert_eq!(s.failing_stage.as_deref(), Some("assertion b"));
    }

    #[test]
    fn classification_survives_finalize() {
        let mut s = Summary::new("check-cone", 1, None);
        s.status = Status::Boundary;
        s.finalize();
        assert_eq!(s.exit_code, exit::BOUNDARY);
        let v: Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["status"], "boundary");
    }
}
