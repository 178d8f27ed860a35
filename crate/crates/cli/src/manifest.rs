use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Feasibility verdict embedded in run outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateVerdict {
    pub feasible: bool,
    pub worst_margin: f64,
    pub worst_time: f64,
    pub failure_detail: Option<String>,
}

/// Written next to every output so the run can be reproduced and audited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub config_path: String,
    pub config_sha256: String,
    pub tool_version: String,
    pub command: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub certificate: CertificateVerdict,
    pub forced: bool,
    pub exit_code: u8,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
