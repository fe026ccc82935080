use std::io::{ErrorKind, Read};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::HarnessError;

/// Captured output of one toolchain invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    pub stdout: String,
    pub stderr: String,
    /// `None` when the process was terminated by a signal.
    pub exit_code: Option<i32>,
    /// The process group was killed at the hard deadline.
    pub killed: bool,
    pub wall: Duration,
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Runs `program` in its own process group; the whole group is killed if it
/// is still running after `deadline`.
pub fn run(program: &Path, args: &[String], cwd: &Path, deadline: Duration) -> Result<RawRun, HarnessError> {
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| match e.kind() {
            ErrorKind::NotFound | ErrorKind::PermissionDenied => {
                HarnessError::ToolchainMissing(format!("cannot execute {}: {e}", program.display()))
            }
            _ => HarnessError::Io(e),
        })?;
    let pgid = child.id() as libc::pid_t;
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));
    let mut killed = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= deadline {
            // SAFETY: signalling a process group we created; no memory is shared.
            unsafe {
                libc::killpg(pgid, libc::SIGKILL);
            }
            killed = true;
            break child.wait()?;
        }
        thread::sleep(Duration::from_millis(10));
    };
    let wall = start.elapsed();
    if killed {
        // grandchildren may still hold the pipes open; don't wait for them
        unsafe {
            libc::killpg(pgid, libc::SIGKILL);
        }
    }
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    Ok(RawRun {
        stdout,
        stderr,
        exit_code: status.code(),
        killed,
        wall,
    })
}

/// Counting semaphore bounding concurrent solver processes.
#[derive(Debug)]
pub struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}
