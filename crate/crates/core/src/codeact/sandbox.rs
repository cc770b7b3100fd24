//! Isolated interpreter runs.
//!
//! Each run gets a fresh scratch directory, an empty environment, its own
//! process group, and (where the kernel allows) a private network namespace
//! plus a Landlock ruleset: read/execute everywhere, write only in scratch,
//! no TCP bind or connect. Wall-clock and output limits are enforced from the
//! parent by killing the whole process group.

use std::io::{self, Read};
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sync::Semaphore;

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("interpreter {0:?} not found on PATH")]
    InterpreterNotFound(String),
    #[error("sandbox setup failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    RuntimeError,
    Timeout,
    OutputTruncated,
    SandboxError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub elapsed_ms: u64,
    /// Set only when the scratch directory was kept for inspection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scratch_dir: Option<PathBuf>,
}

impl ExecutionResult {
    pub fn succeeded(&self) -> bool {
        self.status == ExecStatus::Ok
    }
}

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    pub interpreter: PathBuf,
    pub per_run_timeout: Duration,
    /// Per-stream byte cap.
    pub output_cap: usize,
    pub max_concurrent: usize,
    pub keep_scratch: bool,
    pub memory_limit: u64,
}

impl SandboxConfig {
    pub fn new(interpreter: PathBuf) -> Self {
        Self {
            interpreter,
            per_run_timeout: Duration::from_secs(10),
            output_cap: 64 * 1024,
            max_concurrent: 4,
            keep_scratch: false,
            memory_limit: 1 << 30,
        }
    }
}

/// Finds an interpreter by path or on `PATH`.
pub fn resolve_interpreter(name: &str) -> Result<PathBuf, SandboxError> {
    let candidate = Path::new(name);
    if candidate.components().count() > 1 {
        return if candidate.is_file() {
            Ok(candidate.to_path_buf())
        } else {
            Err(SandboxError::InterpreterNotFound(name.into()))
        };
    }
    std::env::var_os("PATH")
        .iter()
        .flat_map(std::env::split_paths)
        .map(|dir| dir.join(name))
        .find(|p| p.is_file())
        .ok_or_else(|| SandboxError::InterpreterNotFound(name.into()))
}

/// What isolation the host kernel actually provides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Isolation {
    pub landlock_abi: Option<i32>,
}

pub struct Sandbox {
    config: SandboxConfig,
    slots: Semaphore,
    isolation: Isolation,
}

impl Sandbox {
    pub fn new(config: SandboxConfig) -> Result<Self, SandboxError> {
        if !config.interpreter.is_file() {
            return Err(SandboxError::InterpreterNotFound(
                config.interpreter.display().to_string(),
            ));
        }
        let slots = Semaphore::new(config.max_concurrent);
        Ok(Self {
            config,
            slots,
            isolation: Isolation {
                landlock_abi: landlock::abi_version(),
            },
        })
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn isolation(&self) -> Isolation {
        self.isolation
    }

    /// Runs `program` to completion or until a limit trips. Setup failures
    /// are reported as `SandboxError` status rather than panicking.
    pub fn run(&self, program: &str) -> ExecutionResult {
        let _slot = self.slots.acquire();
        let start = Instant::now();
        match self.run_inner(program, start) {
            Ok(r) => r,
            Err(e) => ExecutionResult {
                status: ExecStatus::SandboxError,
                exit_code: None,
                stdout: String::new(),
                stderr: e.to_string(),
                elapsed_ms: start.elapsed().as_millis() as u64,
                scratch_dir: None,
            },
        }
    }

    fn run_inner(&self, program: &str, start: Instant) -> io::Result<ExecutionResult> {
        let scratch = tempfile::Builder::new().prefix("avalon-codeact-").tempdir()?;
        let script = scratch.path().join("main.py");
        std::fs::write(&script, program)?;

        let ruleset = match self.isolation.landlock_abi {
            Some(abi) => Some(landlock::build_ruleset(abi, scratch.path())?),
            None => None,
        };
        let ruleset_fd = ruleset.as_ref().map(|f| f.as_raw_fd());
        let cpu_secs = self.config.per_run_timeout.as_secs() + 2;
        let memory = self.config.memory_limit;

        let mut cmd = Command::new(&self.config.interpreter);
        cmd.arg("-I")
            .arg(&script)
            .current_dir(scratch.path())
            .env_clear()
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PATH", "/usr/local/bin:/usr/bin:/bin")
            .env("HOME", scratch.path())
            .env("LANG", "C.UTF-8")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        // SAFETY: only async-signal-safe libc calls between fork and exec.
        unsafe {
            cmd.pre_exec(move || {
                if libc::setpgid(0, 0) != 0 {
                    return Err(io::Error::last_os_error());
                }
                // best effort: an empty network namespace
                if libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) != 0 {
                    let _ = libc::unshare(libc::CLONE_NEWNET);
                }
                let limit = |res, v: u64| {
                    let r = libc::rlimit { rlim_cur: v, rlim_max: v };
                    libc::setrlimit(res, &r);
                };
                limit(libc::RLIMIT_CPU, cpu_secs);
                limit(libc::RLIMIT_AS, memory);
                limit(libc::RLIMIT_CORE, 0);
                limit(libc::RLIMIT_FSIZE, 16 << 20);
                if libc::prctl(libc::PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0 {
                    return Err(io::Error::last_os_error());
                }
                if let Some(fd) = ruleset_fd {
                    if libc::syscall(libc::SYS_landlock_restrict_self, fd, 0) != 0 {
                        return Err(io::Error::last_os_error());
                    }
                }
                Ok(())
            });
        }
        let mut child = cmd.spawn()?;
        drop(ruleset);
        let pgid = child.id() as libc::pid_t;

        let overflow = Arc::new(AtomicBool::new(false));
        let cap = self.config.output_cap;
        let reader = |stream: Box<dyn Read + Send>| {
            let overflow = overflow.clone();
            thread::spawn(move || capture(stream, cap, &overflow, pgid))
        };
        let out = reader(Box::new(child.stdout.take().expect("piped stdout")));
        let err = reader(Box::new(child.stderr.take().expect("piped stderr")));

        let deadline = start + self.config.per_run_timeout;
        let mut timed_out = false;
        let status = loop {
            if let Some(s) = child.try_wait()? {
                break s;
            }
            if Instant::now() >= deadline {
                timed_out = true;
                kill_group(pgid);
                break child.wait()?;
            }
            thread::sleep(Duration::from_millis(5));
        };
        // reap stragglers that may still hold the pipes open
        kill_group(pgid);
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();

        let status_kind = if timed_out {
            ExecStatus::Timeout
        } else if overflow.load(Ordering::SeqCst) {
            ExecStatus::OutputTruncated
        } else if status.success() {
            ExecStatus::Ok
        } else {
            ExecStatus::RuntimeError
        };
        let scratch_dir = self.config.keep_scratch.then(|| scratch.keep());
        Ok(ExecutionResult {
            status: status_kind,
            exit_code: status.code(),
            stdout: String::from_utf8_lossy(&stdout).into_owned(),
            stderr: String::from_utf8_lossy(&stderr).into_owned(),
            elapsed_ms: start.elapsed().as_millis() as u64,
            scratch_dir,
        })
    }
}

fn kill_group(pgid: libc::pid_t) {
    // SAFETY: signalling our own child's process group.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

fn capture(mut stream: Box<dyn Read + Send>, cap: usize, overflow: &AtomicBool, pgid: libc::pid_t) -> Vec<u8> {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        match stream.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
                if n > room && !overflow.swap(true, Ordering::SeqCst) {
                    kill_group(pgid);
                }
            }
        }
    }
    kept
}

mod landlock {
    use super::*;
    use std::ffi::CString;
    use std::os::unix::ffi::OsStrExt;

    const CREATE_RULESET_VERSION: u32 = 1;
    const RULE_PATH_BENEATH: libc::c_int = 1;

    const FS_EXECUTE: u64 = 1 << 0;
    const FS_READ_FILE: u64 = 1 << 2;
    const FS_READ_DIR: u64 = 1 << 3;
    const NET_BIND_TCP: u64 = 1 << 0;
    const NET_CONNECT_TCP: u64 = 1 << 1;
    const SCOPE_ABSTRACT_UNIX: u64 = 1 << 0;
    const SCOPE_SIGNAL: u64 = 1 << 1;

    #[repr(C)]
    struct RulesetAttr {
        handled_access_fs: u64,
        handled_access_net: u64,
        scoped: u64,
    }

    #[repr(C, packed)]
    struct PathBeneathAttr {
        allowed_access: u64,
        parent_fd: i32,
    }

    pub(super) fn abi_version() -> Option<i32> {
        // SAFETY: version query takes no pointers.
        let v = unsafe {
            libc::syscall(
                libc::SYS_landlock_create_ruleset,
                std::ptr::null::<RulesetAttr>(),
                0usize,
                CREATE_RULESET_VERSION,
            )
        };
        (v > 0).then_some(v as i32)
    }

    fn fs_rights(abi: i32) -> u64 {
        let mut bits = (1u64 << 13) - 1;
        if abi >= 2 {
            bits |= 1 << 13; // refer
        }
        if abi >= 3 {
            bits |= 1 << 14; // truncate
        }
        if abi >= 5 {
            bits |= 1 << 15; // ioctl on devices
        }
        bits
    }

    fn add_path(ruleset: &OwnedFd, path: &Path, access: u64) -> io::Result<()> {
        let c = CString::new(path.as_os_str().as_bytes())?;
        // SAFETY: valid NUL-terminated path.
        let fd = unsafe { libc::open(c.as_ptr(), libc::O_PATH | libc::O_CLOEXEC) };
        if fd < 0 {
            return Err(io::Error::last_os_error());
        }
        // SAFETY: fd was just opened and is owned here.
        let fd = unsafe { OwnedFd::from_raw_fd(fd) };
        let attr = PathBeneathAttr {
            allowed_access: access,
            parent_fd: fd.as_raw_fd(),
        };
        // SAFETY: attr outlives the call.
        let r = unsafe {
            libc::syscall(
                libc::SYS_landlock_add_rule,
                ruleset.as_raw_fd(),
                RULE_PATH_BENEATH,
                &attr as *const PathBeneathAttr,
                0u32,
            )
        };
        if r != 0 {
            return Err(io::Error::last_os_error());
        }
        Ok(())
    }

    pub(super) fn build_ruleset(abi: i32, scratch: &Path) -> io::Result<OwnedFd> {
        let fs = fs_rights(abi);
        let attr = RulesetAttr {
            handled_access_fs: fs,
            handled_access_net: if abi >= 4 { NET_BIND_TCP | NET_CONNECT_TCP } else { 0 },
            scoped: if abi >= 6 { SCOPE_ABSTRACT_UNIX | SCOPE_SIGNAL } else { 0 },
        };
        let size = match abi {
            1..=3 => 8,
            4..=5 => 16,
            _ => std::mem::size_of::<RulesetAttr>(),
        };
        // SAFETY: attr is valid for `size` bytes.
        let fd = unsafe {
            libc::syscall(
                libc::SYS_landlock_create_ruleset,
                &attr as *const RulesetAttr,
                size,
                0u32,
            )
        };
        if fd < 0 {
            return Err(io::Error::last_os_error());
        }
        // SAFETY: the kernel returned a fresh close-on-exec descriptor.
        let ruleset = unsafe { OwnedFd::from_raw_fd(fd as i32) };
        add_path(&ruleset, Path::new("/"), FS_EXECUTE | FS_READ_FILE | FS_READ_DIR)?;
        add_path(&ruleset, scratch, fs)?;
        Ok(ruleset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sandbox(timeout_ms: u64, cap: usize) -> Sandbox {
        let mut cfg = SandboxConfig::new(resolve_interpreter("python3").unwrap());
        cfg.per_run_timeout = Duration::from_millis(timeout_ms);
        cfg.output_cap = cap;
        Sandbox::new(cfg).unwrap()
    }

    #[test]
    fn runs_and_captures() {
        let r = sandbox(10_000, 1024).run("import sys\nprint('hi')\nprint('oops', file=sys.stderr)\n");
        assert_eq!(r.status, ExecStatus::Ok);
        assert_eq!(r.stdout, "hi\n");
        assert_eq!(r.stderr, "oops\n");
    }

    #[test]
    fn nonzero_exit_is_runtime_error() {
        let r = sandbox(10_000, 1024).run("undefined_name\n");
        assert_eq!(r.status, ExecStatus::RuntimeError);
        assert!(r.stderr.contains("NameError"));
    }

    #[test]
    fn environment_is_empty() {
        std::env::set_var("AVALON_SANDBOX_CANARY", "leak");
        let r = sandbox(10_000, 4096).run("import os\nprint(sorted(os.environ))\n");
        assert!(!r.stdout.contains("AVALON_SANDBOX_CANARY"), "{}", r.stdout);
    }

    #[test]
    fn writes_outside_scratch_are_denied() {
        let r = sandbox(10_000, 4096).run(
            "open('ok.txt','w').write('x')\ntry:\n    open('/tmp/avalon_escape_probe','w').write('x')\n    print('ESCAPED')\nexcept OSError as e:\n    print('denied')\n",
        );
        if sandbox(1000, 1).isolation().landlock_abi.is_some() {
            assert_eq!(r.stdout.trim(), "denied", "{r:?}");
        }
    }

    #[test]
    fn missing_interpreter() {
        assert!(resolve_interpreter("definitely-not-a-python").is_err());
        assert!(Sandbox::new(SandboxConfig::new("/nonexistent/python".into())).is_err());
    }
}
