use std::env;
use std::path::{Path, PathBuf};

use super::HarnessError;

/// Environment variable naming the `minizinc` executable to use.
pub const MINIZINC_ENV: &str = "MINIZINC";

/// Location of the MiniZinc executable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Toolchain {
    program: PathBuf,
}

fn bundled_shim() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../tools/minizinc-wasm/bin/minizinc")
}

fn on_path(name: &str) -> Option<PathBuf> {
    let paths = env::var_os("PATH")?;
    env::split_paths(&paths).map(|d| d.join(name)).find(|p| p.is_file())
}

impl Toolchain {
    pub fn at(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }

    /// Finds `minizinc`: `$MINIZINC`, then `PATH`, then the WebAssembly shim
    /// under `tools/minizinc-wasm` once its npm dependencies are installed.
    pub fn discover() -> Result<Self, HarnessError> {
        if let Some(p) = env::var_os(MINIZINC_ENV).filter(|p| !p.is_empty()) {
            let p = PathBuf::from(p);
            return if p.is_file() {
                Ok(Self::at(p))
            } else {
                Err(HarnessError::ToolchainMissing(format!(
                    "{MINIZINC_ENV}={} does not exist",
                    p.display()
                )))
            };
        }
        if let Some(p) = on_path("minizinc") {
            return Ok(Self::at(p));
        }
        let shim = bundled_shim();
        let installed = shim
            .parent()
            .and_then(Path::parent)
            .is_some_and(|d| d.join("node_modules/minizinc").is_dir());
        if shim.is_file() && installed {
            return Ok(Self::at(shim));
        }
        Err(HarnessError::ToolchainMissing(
            "no `minizinc` executable: set MINIZINC, add it to PATH, or run `npm install` in tools/minizinc-wasm"
                .into(),
        ))
    }

    pub fn program(&self) -> &Path {
        &self.program
    }
}
