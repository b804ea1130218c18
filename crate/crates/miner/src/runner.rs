//! External build runner speaking the RESULT-file protocol.
//!
//! The configured command runs inside a scratch checkout (the working tree,
//! materialized to disk) with `TEST_ID` and `LANG_LEVEL` in its environment.
//! It must leave a `RESULT` file behind containing exactly one of:
//!
//! ```text
//! PASS
//! FAIL <file>:<line> <message>
//! NOFEEDBACK <CompileError|TestUnresolvable|Timeout>
//! ```
//!
//! A run past the timeout is killed and reported as `NoFeedback(Timeout)`.
//! A command that cannot be spawned, or a missing/garbled RESULT file, is a
//! runner crash: the search for that commit aborts instead of guessing.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use regress_core::evaluator::TreeRunner;
use regress_core::history::{EvalError, FailureSignature, Feedback, NoFeedbackReason, TestId};
use regress_core::migrate::EnvironmentMetadata;
use regress_core::tree::SourceTree;

#[derive(Debug, Clone)]
pub struct CommandRunner {
    pub command: Vec<String>,
    pub timeout: Duration,
    /// Extra runs after a Fail verdict; the last verdict stands.
    pub retries: u32,
    scratch_root: PathBuf,
    sequence: Arc<AtomicU64>,
}

impl CommandRunner {
    pub fn new(command: Vec<String>, timeout: Duration, retries: u32, scratch_root: PathBuf) -> Self {
        Self {
            command,
            timeout,
            retries,
            scratch_root,
            sequence: Arc::new(AtomicU64::new(0)),
        }
    }

    fn run_once(&self, dir: &Path, test: &TestId, env: &EnvironmentMetadata) -> Result<Feedback, EvalError> {
        let Some((program, args)) = self.command.split_first() else {
            return Err(EvalError::RunnerCrash("empty runner command".into()));
        };
        let mut child = Command::new(program)
            .args(args)
            .current_dir(dir)
            .env("TEST_ID", test.as_str())
            .env("LANG_LEVEL", &env.language_level)
            .spawn()
            .map_err(|e| EvalError::RunnerCrash(format!("spawn `{program}`: {e}")))?;

        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) => {
                    if started.elapsed() >= self.timeout {
                        let _ = child.kill();
                        let _ = child.wait();
                        break None;
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => return Err(EvalError::RunnerCrash(format!("wait: {e}"))),
            }
        };
        let Some(_status) = status else {
            return Ok(Feedback::NoFeedback(NoFeedbackReason::Timeout));
        };

        let result_path = dir.join("RESULT");
        let raw = std::fs::read_to_string(&result_path).map_err(|e| {
            EvalError::RunnerCrash(format!("RESULT file unreadable at {result_path:?}: {e}"))
        })?;
        parse_result(raw.trim())
    }
}

pub fn parse_result(line: &str) -> Result<Feedback, EvalError> {
    if line == "PASS" {
        return Ok(Feedback::Pass);
    }
    if let Some(rest) = line.strip_prefix("FAIL ") {
        let (loc, message) = rest
            .split_once(' ')
            .ok_or_else(|| EvalError::RunnerCrash(format!("bad FAIL line `{line}`")))?;
        let (file, line_no) = loc
            .rsplit_once(':')
            .ok_or_else(|| EvalError::RunnerCrash(format!("bad FAIL location `{loc}`")))?;
        let line_no: u32 = line_no
            .parse()
            .map_err(|_| EvalError::RunnerCrash(format!("bad FAIL line number `{loc}`")))?;
        return Ok(Feedback::Fail(FailureSignature {
            message: message.to_string(),
            file: file.to_string(),
            line: line_no,
        }));
    }
    if let Some(reason) = line.strip_prefix("NOFEEDBACK ") {
        let reason = match reason.trim() {
            "CompileError" => NoFeedbackReason::CompileError,
            "TestUnresolvable" => NoFeedbackReason::TestUnresolvable,
            "Timeout" => NoFeedbackReason::Timeout,
            other => {
                return Err(EvalError::RunnerCrash(format!(
                    "unknown NOFEEDBACK reason `{other}`"
                )))
            }
        };
        return Ok(Feedback::NoFeedback(reason));
    }
    Err(EvalError::RunnerCrash(format!("unrecognized RESULT `{line}`")))
}

/// Writes a tree under `root`, creating parent directories.
pub fn materialize_tree(tree: &SourceTree, root: &Path) -> std::io::Result<()> {
    for (path, content) in tree.iter() {
        let full = root.join(path);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(full, content)?;
    }
    Ok(())
}

impl TreeRunner for CommandRunner {
    fn run(
        &mut self,
        tree: &SourceTree,
        env: &EnvironmentMetadata,
        test: &TestId,
    ) -> Result<Feedback, EvalError> {
        let n = self.sequence.fetch_add(1, Ordering::Relaxed);
        let dir = self.scratch_root.join(format!("eval-{n:06}"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| EvalError::RunnerCrash(format!("scratch dir: {e}")))?;
        materialize_tree(tree, &dir)
            .map_err(|e| EvalError::RunnerCrash(format!("materialize tree: {e}")))?;

        let mut fb = self.run_once(&dir, test, env)?;
        let mut attempts_left = self.retries;
        while fb.is_fail() && attempts_left > 0 {
            fb = self.run_once(&dir, test, env)?;
            attempts_left -= 1;
        }
        let _ = std::fs::remove_dir_all(&dir);
        Ok(fb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_three_verdicts() {
        assert_eq!(parse_result("PASS").unwrap(), Feedback::Pass);
        let fb = parse_result("FAIL src/test/T.dsl:12 expected 5 got 3").unwrap();
        match fb {
            Feedback::Fail(sig) => {
                assert_eq!(sig.file, "src/test/T.dsl");
                assert_eq!(sig.line, 12);
                assert_eq!(sig.message, "expected 5 got 3");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            parse_result("NOFEEDBACK CompileError").unwrap(),
            Feedback::NoFeedback(NoFeedbackReason::CompileError)
        );
        assert!(parse_result("MAYBE").is_err());
        assert!(parse_result("FAIL nowhere").is_err());
    }

    #[test]
    fn sleeping_runner_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let mut runner = CommandRunner::new(
            vec!["sh".into(), "-c".into(), "sleep 5".into()],
            Duration::from_secs(1),
            0,
            dir.path().to_path_buf(),
        );
        let tree = SourceTree::new();
        let env = EnvironmentMetadata::default();
        let started = Instant::now();
        let fb = runner.run(&tree, &env, &TestId::new("T.t")).unwrap();
        assert_eq!(fb, Feedback::NoFeedback(NoFeedbackReason::Timeout));
        assert!(started.elapsed() < Duration::from_secs(4));
    }

    #[test]
    fn reads_result_file_from_scratch_dir() {
        let dir = tempfile::tempdir().unwrap();
        let mut runner = CommandRunner::new(
            vec![
                "sh".into(),
                "-c".into(),
                // the test id flows in via the environment
                "echo \"FAIL $TEST_ID:3 boom\" > RESULT".into(),
            ],
            Duration::from_secs(5),
            0,
            dir.path().to_path_buf(),
        );
        let mut tree = SourceTree::new();
        tree.insert("src/main/A.dsl", "class A {\n}\n");
        let fb = runner
            .run(&tree, &EnvironmentMetadata::default(), &TestId::new("T.x"))
            .unwrap();
        match fb {
            Feedback::Fail(sig) => {
                assert_eq!(sig.file, "T.x");
                assert_eq!(sig.line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_result_file_is_a_crash() {
        let dir = tempfile::tempdir().unwrap();
        let mut runner = CommandRunner::new(
            vec!["true".into()],
            Duration::from_secs(5),
            0,
            dir.path().to_path_buf(),
        );
        let err = runner
            .run(&SourceTree::new(), &EnvironmentMetadata::default(), &TestId::new("T.t"))
            .unwrap_err();
        assert!(matches!(err, EvalError::RunnerCrash(_)));
    }
}
