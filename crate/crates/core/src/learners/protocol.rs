//! Newline-delimited JSON messages spoken between the toolkit and an external
//! teacher process, plus a small in-crate server used for built-in learners.
//!
//! ```text
//! {"id":1,"cmd":"init","task":"regression","n_features":3}   -> {"id":1,"ok":true,"v":1}
//! {"id":2,"cmd":"fit","X":[[...]],"y":[...]}                   -> {"id":2,"ok":true}
//! {"id":3,"cmd":"predict","X":[[...]]}                         -> {"id":3,"pred":[...]} | {"id":3,"proba":[[...]]}
//! {"id":4,"cmd":"shutdown"}
//! ```
//! Any reply may be `{"id":..,"error":"message"}` instead.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{LearnerSpec, Prediction, Predictor};
use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum Command {
    Init {
        task: Task,
        n_features: usize,
    },
    Fit {
        #[serde(rename = "X")]
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    },
    Predict {
        #[serde(rename = "X")]
        x: Vec<Vec<f64>>,
    },
    Shutdown,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Init { .. } => "init",
            Command::Fit { .. } => "fit",
            Command::Predict { .. } => "predict",
            Command::Shutdown => "shutdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proba: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Reply {
    pub fn ok(id: u64) -> Self {
        Reply {
            id: Some(id),
            ok: Some(true),
            ..Default::default()
        }
    }

    pub fn error(id: Option<u64>, msg: impl Into<String>) -> Self {
        Reply {
            id,
            error: Some(msg.into()),
            ..Default::default()
        }
    }
}

/// Deliberate misbehaviour for exercising client failure handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Exit without replying when the first predict arrives.
    ExitOnPredict,
    /// Answer the first predict with an error reply.
    FailFirstPredict,
}

struct Session {
    learner: LearnerSpec,
    task: Option<Task>,
    n_features: usize,
    model: Option<Box<dyn Predictor>>,
    predicts: usize,
}

impl Session {
    fn handle(&mut self, id: u64, cmd: Command) -> Result<Reply> {
        match cmd {
            Command::Init { task, n_features } => {
                self.task = Some(task);
                self.n_features = n_features;
                self.model = None;
                Ok(Reply {
                    v: Some(PROTOCOL_VERSION),
                    ..Reply::ok(id)
                })
            }
            Command::Fit { x, y } => {
                let task = self.task.ok_or_else(|| Error::invalid("fit before init"))?;
                let x = Matrix::from_rows(&x)?;
                if x.n_cols() != self.n_features {
                    return Err(Error::invalid(format!(
                        "fit rows have {} features, init declared {}",
                        x.n_cols(),
                        self.n_features
                    )));
                }
                let d = Dataset::from_parts(x, y, task)?;
                self.model = Some(self.learner.fit(&d)?);
                Ok(Reply::ok(id))
            }
            Command::Predict { x } => {
                let model = self.model.as_ref().ok_or_else(|| Error::invalid("predict before fit"))?;
                let x = if x.is_empty() {
                    Matrix::zeros(0, self.n_features)
                } else {
                    Matrix::from_rows(&x)?
                };
                Ok(match model.predict(&x)? {
                    Prediction::Regression(v) => Reply {
                        id: Some(id),
                        pred: Some(v),
                        ..Default::default()
                    },
                    Prediction::Proba(p) => Reply {
                        id: Some(id),
                        proba: Some(p),
                        ..Default::default()
                    },
                })
            }
            Command::Shutdown => Ok(Reply::ok(id)),
        }
    }
}

/// Serves one session over a line-oriented stream until shutdown or end of input.
pub fn serve<R: BufRead, W: Write>(input: R, mut output: W, learner: LearnerSpec, fault: Option<Fault>) -> Result<()> {
    let mut session = Session {
        learner,
        task: None,
        n_features: 0,
        model: None,
        predicts: 0,
    };
    let io_err = |e| Error::io("<bridge output>", e);
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<bridge input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64()));
                Reply::error(id, format!("malformed message: {e}"))
            }
            Ok(req) => {
                let shutdown = req.command == Command::Shutdown;
                if let Command::Predict { .. } = req.command {
                    session.predicts += 1;
                    match fault {
                        Some(Fault::ExitOnPredict) => std::process::exit(17),
                        Some(Fault::FailFirstPredict) if session.predicts == 1 => {
                            let r = Reply::error(Some(req.id), "injected failure");
                            writeln!(output, "{}", serde_json::to_string(&r)?).map_err(io_err)?;
                            output.flush().map_err(io_err)?;
                            continue;
                        }
                        _ => {}
                    }
                }
                let reply = session
                    .handle(req.id, req.command)
                    .unwrap_or_else(|e| Reply::error(Some(req.id), e.to_string()));
                if shutdown {
                    writeln!(output, "{}", serde_json::to_string(&reply)?).map_err(io_err)?;
                    output.flush().map_err(io_err)?;
                    return Ok(());
                }
                reply
            }
        };
        writeln!(output, "{}", serde_json::to_string(&reply)?).map_err(io_err)?;
        output.flush().map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(lines: &[&str], learner: LearnerSpec) -> Vec<Reply> {
        let input = lines.join("\n");
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, learner, None).unwrap();
        String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    #[test]
    fn request_wire_format() {
        let r = Request {
            id: 7,
            command: Command::Predict { x: vec![vec![1.0, 2.5]] },
        };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"id":7,"cmd":"predict","X":[[1.0,2.5]]}"#);
        let back: Request = serde_json::from_str(r#"{"id":1,"cmd":"init","task":"binary","n_features":2}"#).unwrap();
        assert_eq!(back.command, Command::Init { task: Task::Binary, n_features: 2 });
    }

    #[test]
    fn echo_session() {
        let replies = run(
            &[
                r#"{"id":1,"cmd":"init","task":"regression","n_features":1}"#,
                r#"{"id":2,"cmd":"fit","X":[[0],[1],[2]],"y":[1,2,6]}"#,
                r#"{"id":3,"cmd":"predict","X":[[5],[7]]}"#,
                r#"{"id":4,"cmd":"shutdown"}"#,
                r#"{"id":5,"cmd":"predict","X":[[5]]}"#,
            ],
            LearnerSpec::Echo,
        );
        assert_eq!(replies.len(), 4);
        assert_eq!(replies[0].v, Some(1));
        assert_eq!(replies[2].pred, Some(vec![3.0, 3.0]));
    }

    #[test]
    fn errors_are_replies() {
        let replies = run(
            &[
                r#"{"id":1,"cmd":"fit","X":[[0]],"y":[1]}"#,
                r#"{"id":2,"cmd":"bogus"}"#,
                "not json",
            ],
            LearnerSpec::Echo,
        );
        assert!(replies[0].error.as_deref().unwrap().contains("before init"));
        assert_eq!(replies[1].id, Some(2));
        assert!(replies[1].error.is_some());
        assert_eq!(replies[2].id, None);
    }
}
