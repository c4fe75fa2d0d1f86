//! Versioned binary checkpoint: architecture, parameters, optimizer state,
//! epoch counter, and the originating seed. The encoding is fixed-layout
//! little-endian, so save -> load -> save is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{ArchSpec, NnError, OptimizerKind};

const MAGIC: &[u8; 8] = b"NNKCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: ArchSpec,
    pub epoch: u64,
    pub seed: u64,
    pub optimizer_kind: OptimizerKind,
    pub actor_opt_cache: Vec<f64>,
    pub critic_opt_cache: Vec<f64>,
    pub actor_params: Vec<f64>,
    pub critic_params: Vec<f64>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        for dim in [
            self.arch.n_rows,
            self.arch.n_cols,
            self.arch.conv1_filters,
            self.arch.conv1_kernel,
            self.arch.conv2_filters,
            self.arch.conv2_kh,
            self.arch.conv2_kw,
            self.arch.n_actions,
        ] {
            w.write_all(&(dim as u32).to_le_bytes())?;
        }
        w.write_all(&self.epoch.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        match self.optimizer_kind {
            OptimizerKind::Sgd => {
                w.write_all(&[0u8])?;
                w.write_all(&0f64.to_le_bytes())?;
                w.write_all(&0f64.to_le_bytes())?;
            }
            OptimizerKind::RmsProp { decay, epsilon } => {
                w.write_all(&[1u8])?;
                w.write_all(&decay.to_le_bytes())?;
                w.write_all(&epsilon.to_le_bytes())?;
            }
        }
        for vec in [
            &self.actor_opt_cache,
            &self.critic_opt_cache,
            &self.actor_params,
            &self.critic_params,
        ] {
            write_vec(&mut w, vec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Format(format!(
                "bad magic {:?} (expected {:?})",
                magic, MAGIC
            )));
        }
        let mut dims = [0usize; 8];
        for d in &mut dims {
            *d = read_u32(&mut r)? as usize;
        }
        let arch = ArchSpec {
            n_rows: dims[0],
            n_cols: dims[1],
            conv1_filters: dims[2],
            conv1_kernel: dims[3],
            conv2_filters: dims[4],
            conv2_kh: dims[5],
            conv2_kw: dims[6],
            n_actions: dims[7],
        };
        arch.validate()?;
        let epoch = read_u64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let mut kind_byte = [0u8; 1];
        r.read_exact(&mut kind_byte)?;
        let decay = read_f64(&mut r)?;
        let epsilon = read_f64(&mut r)?;
        let optimizer_kind = match kind_byte[0] {
            0 => OptimizerKind::Sgd,
            1 => OptimizerKind::RmsProp { decay, epsilon },
            k => return Err(NnError::Format(format!("unknown optimizer kind {k}"))),
        };
        let actor_opt_cache = read_vec(&mut r)?;
        let critic_opt_cache = read_vec(&mut r)?;
        let actor_params = read_vec(&mut r)?;
        let critic_params = read_vec(&mut r)?;
        Ok(Checkpoint {
            arch,
            epoch,
            seed,
            optimizer_kind,
            actor_opt_cache,
            critic_opt_cache,
            actor_params,
            critic_params,
        })
    }
}

fn write_vec<W: Write>(w: &mut W, v: &[f64]) -> std::io::Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_vec<R: Read>(r: &mut R) -> Result<Vec<f64>, NnError> {
    let len = read_u64(r)? as usize;
    if len > (1 << 28) {
        return Err(NnError::Format(format!("vector length {len} implausible")));
    }
    let mut v = Vec::with_capacity(len);
    for _ in 0..len {
        v.push(read_f64(r)?);
    }
    Ok(v)
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ActorCritic;

    #[test]
    fn roundtrip_is_byte_stable() {
        let spec = ArchSpec::for_pool(6);
        let ac = ActorCritic::new(&spec, 42).unwrap();
        let ck = Checkpoint {
            arch: spec,
            epoch: 17,
            seed: 42,
            optimizer_kind: OptimizerKind::rmsprop(),
            actor_opt_cache: vec![0.0; ac.actor.n_params()],
            critic_opt_cache: vec![0.0; ac.critic.n_params()],
            actor_params: ac.actor.params(),
            critic_params: ac.critic.params(),
        };
        let dir = std::env::temp_dir();
        let p1 = dir.join("nnkit_ck_test_1.bin");
        let p2 = dir.join("nnkit_ck_test_2.bin");
        ck.save(&p1).unwrap();
        let loaded = Checkpoint::load(&p1).unwrap();
        assert_eq!(loaded, ck);
        loaded.save(&p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        let _ = std::fs::remove_file(&p1);
        let _ = std::fs::remove_file(&p2);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = std::env::temp_dir();
        let p = dir.join("nnkit_ck_badmagic.bin");
        std::fs::write(&p, b"NOTACKPTxxxxxxxxxxxxxxxx").unwrap();
        assert!(Checkpoint::load(&p).is_err());
        let _ = std::fs::remove_file(&p);
    }
}
