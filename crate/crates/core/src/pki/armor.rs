//! PEM-style text armor for certificates and secret keys.

use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ed25519_dalek::SigningKey;

use super::cert::Certificate;
use super::PkiError;

pub const CERT_LABEL: &str = "JINGBING CERT";
pub const SECRET_KEY_LABEL: &str = "JINGBING SECRET KEY";

const LINE_WIDTH: usize = 64;

pub fn armor(label: &str, bytes: &[u8]) -> String {
    let body = STANDARD.encode(bytes);
    let mut out = format!("-----BEGIN {label}-----\n");
    for chunk in body.as_bytes().chunks(LINE_WIDTH) {
        out.push_str(std::str::from_utf8(chunk).expect("base64 is ascii"));
        out.push('\n');
    }
    out.push_str(&format!("-----END {label}-----\n"));
    out
}

/// Extracts the payload of the first block with the given label.
pub fn dearmor(label: &str, text: &str) -> Result<Vec<u8>, PkiError> {
    let begin = format!("-----BEGIN {label}-----");
    let end = format!("-----END {label}-----");
    let mut lines = text.lines().map(str::trim);
    lines
        .by_ref()
        .find(|l| *l == begin)
        .ok_or(PkiError::Armor("missing BEGIN line"))?;
    let mut body = String::new();
    for line in lines {
        if line == end {
            return STANDARD
                .decode(body.as_bytes())
                .map_err(|_| PkiError::Armor("invalid base64"));
        }
        body.push_str(line);
    }
    Err(PkiError::Armor("missing END line"))
}

pub fn cert_to_pem(cert: &Certificate) -> String {
    armor(CERT_LABEL, &cert.to_bytes())
}

pub fn cert_from_pem(text: &str) -> Result<Certificate, PkiError> {
    Certificate::from_bytes(&dearmor(CERT_LABEL, text)?)
}

pub fn key_to_pem(key: &SigningKey) -> String {
    armor(SECRET_KEY_LABEL, key.as_bytes())
}

pub fn key_from_pem(text: &str) -> Result<SigningKey, PkiError> {
    let seed: [u8; 32] = dearmor(SECRET_KEY_LABEL, text)?
        .try_into()
        .map_err(|_| PkiError::Armor("secret key must be 32 bytes"))?;
    Ok(SigningKey::from_bytes(&seed))
}

pub fn write_cert(path: &Path, cert: &Certificate) -> std::io::Result<()> {
    fs::write(path, cert_to_pem(cert))
}

/// Writes a secret key readable by the owner only.
pub fn write_secret_key(path: &Path, key: &SigningKey) -> std::io::Result<()> {
    let mut options = fs::OpenOptions::new();
    options.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path)?;
    file.write_all(key_to_pem(key).as_bytes())?;
    file.sync_all()
}

pub fn read_cert(path: &Path) -> Result<Certificate, PkiError> {
    let text =
        fs::read_to_string(path).map_err(|e| PkiError::Io(format!("{}: {e}", path.display())))?;
    cert_from_pem(&text)
}

pub fn read_secret_key(path: &Path) -> Result<SigningKey, PkiError> {
    let text =
        fs::read_to_string(path).map_err(|e| PkiError::Io(format!("{}: {e}", path.display())))?;
    key_from_pem(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pki::cert::ca_init;
    use rand::rngs::OsRng;

    #[test]
    fn cert_roundtrip() {
        let ca = ca_init(&mut OsRng).unwrap();
        let pem = cert_to_pem(ca.root());
        assert!(pem.starts_with("-----BEGIN JINGBING CERT-----\n"));
        assert!(pem.lines().all(|l| l.len() <= 64 || l.starts_with("-----")));
        assert_eq!(&cert_from_pem(&pem).unwrap(), ca.root());
    }

    #[test]
    fn key_file_is_private() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("party.key");
        let ca = ca_init(&mut OsRng).unwrap();
        write_secret_key(&path, ca.signing_key()).unwrap();
        assert_eq!(
            read_secret_key(&path).unwrap().to_bytes(),
            ca.signing_key().to_bytes()
        );
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = fs::metadata(&path).unwrap().permissions().mode();
            assert_eq!(mode & 0o777, 0o600);
        }
    }

    #[test]
    fn wrong_label_or_garbage() {
        let ca = ca_init(&mut OsRng).unwrap();
        let pem = cert_to_pem(ca.root());
        assert!(key_from_pem(&pem).is_err());
        assert!(cert_from_pem("hello").is_err());
        let broken = pem.replace("-----END JINGBING CERT-----", "");
        assert!(cert_from_pem(&broken).is_err());
        let garbage = "-----BEGIN JINGBING CERT-----\n!!!!\n-----END JINGBING CERT-----\n";
        assert!(cert_from_pem(garbage).is_err());
    }
}
