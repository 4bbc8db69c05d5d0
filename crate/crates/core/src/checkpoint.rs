//! Binary training checkpoints.
//!
//! A bundle stores the run configuration text (with its hash), every
//! agent's four networks, and the occupancy estimator snapshots, as a
//! little-endian binary stream behind a magic/version header. Network
//! parameters round-trip bit-for-bit at `f64` precision.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::agents::AgentSpec;
use crate::error::{Error, Result};
use crate::linalg::fnv1a_64;
use crate::net::{Activation, Network};
use crate::occupancy::OccupancySnapshot;
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"INHANDCK";
const VERSION: u32 = 1;

/// All networks of one agent, online and target.
#[derive(Debug, Clone)]
pub struct AgentCheckpoint<R: Real> {
    pub spec: AgentSpec,
    pub actor: Network<R>,
    pub critic: Network<R>,
    pub target_actor: Network<R>,
    pub target_critic: Network<R>,
}

/// Everything needed to resume or evaluate a run, except optimizer and
/// noise state.
#[derive(Debug, Clone)]
pub struct CheckpointBundle<R: Real> {
    /// Run configuration, verbatim TOML text.
    pub config_text: String,
    pub agents: Vec<AgentCheckpoint<R>>,
    pub occupancy: Vec<OccupancySnapshot>,
}

impl<R: Real> CheckpointBundle<R> {
    /// Hash of the embedded configuration text.
    pub fn config_hash(&self) -> u64 {
        fnv1a_64(self.config_text.as_bytes())
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        put_u32(&mut w, VERSION)?;
        put_u64(&mut w, self.config_hash())?;
        put_bytes(&mut w, self.config_text.as_bytes())?;
        put_u32(&mut w, self.agents.len() as u32)?;
        for agent in &self.agents {
            put_spec(&mut w, &agent.spec)?;
            for net in [&agent.actor, &agent.critic, &agent.target_actor, &agent.target_critic] {
                put_network(&mut w, net)?;
            }
        }
        put_u32(&mut w, self.occupancy.len() as u32)?;
        for snap in &self.occupancy {
            put_u32(&mut w, snap.episodes.len() as u32)?;
            for episode in &snap.episodes {
                put_u64(&mut w, episode.len() as u64)?;
                for &(key, mass) in episode {
                    put_u64(&mut w, key)?;
                    put_f64(&mut w, mass)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::checkpoint("not a checkpoint file (bad magic)"));
        }
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::checkpoint(format!(
                "unsupported checkpoint version {version} (expected {VERSION})"
            )));
        }
        let stored_hash = get_u64(&mut r)?;
        let config_text = String::from_utf8(get_bytes(&mut r)?)
            .map_err(|_| Error::checkpoint("config text is not UTF-8"))?;
        if fnv1a_64(config_text.as_bytes()) != stored_hash {
            return Err(Error::checkpoint("config hash mismatch"));
        }
        let n_agents = get_u32(&mut r)? as usize;
        let mut agents = Vec::with_capacity(n_agents);
        for _ in 0..n_agents {
            let spec = get_spec(&mut r)?;
            let actor = get_network(&mut r)?;
            let critic = get_network(&mut r)?;
            let target_actor = get_network(&mut r)?;
            let target_critic = get_network(&mut r)?;
            agents.push(AgentCheckpoint { spec, actor, critic, target_actor, target_critic });
        }
        let n_tables = get_u32(&mut r)? as usize;
        let mut occupancy = Vec::with_capacity(n_tables);
        for _ in 0..n_tables {
            let n_episodes = get_u32(&mut r)? as usize;
            let mut episodes = Vec::with_capacity(n_episodes);
            for _ in 0..n_episodes {
                let len = get_u64(&mut r)? as usize;
                let mut episode = Vec::with_capacity(len);
                for _ in 0..len {
                    let key = get_u64(&mut r)?;
                    let mass = get_f64(&mut r)?;
                    episode.push((key, mass));
                }
                episodes.push(episode);
            }
            occupancy.push(OccupancySnapshot { episodes });
        }
        Ok(CheckpointBundle { config_text, agents, occupancy })
    }
}

// ---------------------------------------------------------------------------
// Little-endian primitives
// ---------------------------------------------------------------------------

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_bytes<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    put_u64(w, bytes.len() as u64)?;
    w.write_all(bytes)?;
    Ok(())
}

fn get_u32<Rd: Read>(r: &mut Rd) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<Rd: Read>(r: &mut Rd) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<Rd: Read>(r: &mut Rd) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_bytes<Rd: Read>(r: &mut Rd) -> Result<Vec<u8>> {
    let len = get_u64(r)? as usize;
    if len > (1 << 32) {
        return Err(Error::checkpoint("unreasonable field length"));
    }
    let mut bytes = vec![0u8; len];
    r.read_exact(&mut bytes)?;
    Ok(bytes)
}

fn put_spec<W: Write>(w: &mut W, spec: &AgentSpec) -> Result<()> {
    put_u32(w, spec.agent_index as u32)?;
    put_u32(w, spec.action_dim as u32)?;
    put_u32(w, spec.obs_dim as u32)?;
    put_u32(w, spec.global_dim as u32)?;
    put_u32(w, spec.neighbor_ids.len() as u32)?;
    for &n in &spec.neighbor_ids {
        put_u32(w, n as u32)?;
    }
    put_u32(w, spec.action_dims.len() as u32)?;
    for &d in &spec.action_dims {
        put_u32(w, d as u32)?;
    }
    Ok(())
}

fn get_spec<Rd: Read>(r: &mut Rd) -> Result<AgentSpec> {
    let agent_index = get_u32(r)? as usize;
    let action_dim = get_u32(r)? as usize;
    let obs_dim = get_u32(r)? as usize;
    let global_dim = get_u32(r)? as usize;
    let n = get_u32(r)? as usize;
    let neighbor_ids = (0..n).map(|_| get_u32(r).map(|v| v as usize)).collect::<Result<_>>()?;
    let n = get_u32(r)? as usize;
    let action_dims = (0..n).map(|_| get_u32(r).map(|v| v as usize)).collect::<Result<_>>()?;
    Ok(AgentSpec { agent_index, action_dim, obs_dim, global_dim, neighbor_ids, action_dims })
}

fn put_network<W: Write, R: Real>(w: &mut W, net: &Network<R>) -> Result<()> {
    put_u32(w, net.sizes().len() as u32)?;
    for &s in net.sizes() {
        put_u32(w, s as u32)?;
    }
    for &a in net.activations() {
        let tag: u8 = match a {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        };
        w.write_all(&[tag])?;
    }
    put_u64(w, net.params().len() as u64)?;
    for &p in net.params() {
        put_f64(w, p.to_f64_lossy())?;
    }
    Ok(())
}

fn get_network<Rd: Read, R: Real>(r: &mut Rd) -> Result<Network<R>> {
    let n_sizes = get_u32(r)? as usize;
    if n_sizes < 2 || n_sizes > 64 {
        return Err(Error::checkpoint("network layer count out of range"));
    }
    let sizes = (0..n_sizes).map(|_| get_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mut activations = Vec::with_capacity(n_sizes - 1);
    for _ in 0..n_sizes - 1 {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        activations.push(match tag[0] {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            t => return Err(Error::checkpoint(format!("unknown activation tag {t}"))),
        });
    }
    let n_params = get_u64(r)? as usize;
    let params =
        (0..n_params).map(|_| get_f64(r).map(R::from_f64_lossy)).collect::<Result<Vec<_>>>()?;
    Network::from_parts(sizes, activations, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_bundle() -> CheckpointBundle<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let spec = AgentSpec {
            agent_index: 0,
            action_dim: 2,
            obs_dim: 4,
            global_dim: 7,
            neighbor_ids: vec![1],
            action_dims: vec![2, 3],
        };
        let mut mk = |sizes: &[usize]| {
            let mut n = Network::<f64>::new(sizes, Activation::Relu, Activation::Tanh).unwrap();
            n.init(&mut rng);
            n
        };
        let actor = mk(&[7, 8, 2]);
        let critic = mk(&[12, 8, 1]);
        CheckpointBundle {
            config_text: "seed = 3\n[env]\nnum_fingers = 3\n".to_string(),
            agents: vec![AgentCheckpoint {
                spec,
                target_actor: actor.clone(),
                target_critic: critic.clone(),
                actor,
                critic,
            }],
            occupancy: vec![OccupancySnapshot {
                episodes: vec![vec![(0, 1.0), (17, 0.25)], vec![(3, 0.9)]],
            }],
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        let bundle = sample_bundle();
        bundle.write_to(&path).unwrap();
        let loaded = CheckpointBundle::<f64>::read_from(&path).unwrap();

        assert_eq!(loaded.config_text, bundle.config_text);
        assert_eq!(loaded.config_hash(), bundle.config_hash());
        assert_eq!(loaded.agents.len(), 1);
        let (a, b) = (&loaded.agents[0], &bundle.agents[0]);
        assert_eq!(a.spec, b.spec);
        for (x, y) in [
            (&a.actor, &b.actor),
            (&a.critic, &b.critic),
            (&a.target_actor, &b.target_actor),
            (&a.target_critic, &b.target_critic),
        ] {
            assert_eq!(x.sizes(), y.sizes());
            assert_eq!(x.activations(), y.activations());
            let xb: Vec<u64> = x.params().iter().map(|p| p.to_bits()).collect();
            let yb: Vec<u64> = y.params().iter().map(|p| p.to_bits()).collect();
            assert_eq!(xb, yb);
        }
        assert_eq!(loaded.occupancy[0].episodes, bundle.occupancy[0].episodes);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"NOTACKPTxxxxxxxxxxxx").unwrap();
        let err = CheckpointBundle::<f64>::read_from(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");

        // Corrupt only the version field of a valid file.
        let good = dir.path().join("good.ckpt");
        sample_bundle().write_to(&good).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();
        bytes[8] = 99;
        std::fs::write(&path, &bytes).unwrap();
        let err = CheckpointBundle::<f64>::read_from(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn detects_config_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tampered.ckpt");
        sample_bundle().write_to(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip one config byte past the header (magic 8 + version 4 + hash 8
        // + length 8).
        bytes[29] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        let err = CheckpointBundle::<f64>::read_from(&path).unwrap_err();
        assert!(err.to_string().contains("hash"), "{err}");
    }

    #[test]
    fn truncated_file_errors_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.ckpt");
        sample_bundle().write_to(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(CheckpointBundle::<f64>::read_from(&path).is_err());
    }
}
