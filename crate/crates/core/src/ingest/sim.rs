//! Synthetic telemetry stream for desk-scale runs.
//!
//! Every metric follows a bounded random walk whose steps for tick `t` are
//! drawn from a generator seeded by `(seed, t)`, so the frame at tick `t`
//! depends on nothing but the config. Node state, user and job rotate per
//! epoch of `state_epoch_ticks` ticks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::parse::silence_gpu;
use crate::model::{EnvTelemetry, GpuTelemetry, NodeKind, NodeState, NodeTelemetry, SnapshotFrame};

/// Per-metric random-walk step sizes (maximum absolute step per tick).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftParams {
    pub cpu_load: f64,
    pub node_temp_c: f64,
    pub gpu_util: f64,
    pub gpu_mem: f64,
    pub gpu_power_w: f64,
    pub gpu_temp_c: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self {
            cpu_load: 0.06,
            node_temp_c: 0.8,
            gpu_util: 0.08,
            gpu_mem: 0.04,
            gpu_power_w: 18.0,
            gpu_temp_c: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatorConfig {
    /// GPU-accelerated nodes (or all nodes when `gpus_per_node` is 0).
    pub node_count: u32,
    pub gpus_per_node: u32,
    /// Extra CPU-only nodes.
    pub cpu_node_count: u32,
    pub tick_hz: f64,
    pub seed: u64,
    pub start_ms: i64,
    pub idle_fraction: f64,
    pub off_fraction: f64,
    pub state_epoch_ticks: u64,
    pub env_sensors: u32,
    pub gpu_mem_capacity_bytes: u64,
    pub drift: DriftParams,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            node_count: 318,
            gpus_per_node: 2,
            cpu_node_count: 0,
            tick_hz: 1.0,
            seed: 1,
            start_ms: 1_750_000_000_000,
            idle_fraction: 0.10,
            off_fraction: 0.03,
            state_epoch_ticks: 30,
            env_sensors: 4,
            // 94 GB per card
            gpu_mem_capacity_bytes: 94_000_000_000,
            drift: DriftParams::default(),
        }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.node_count + self.cpu_node_count == 0 {
            return Err("node_count must be at least 1".into());
        }
        if !(self.tick_hz > 0.0 && self.tick_hz.is_finite()) {
            return Err("tick_hz must be positive".into());
        }
        if !(0.0..=1.0).contains(&(self.idle_fraction + self.off_fraction)) || self.idle_fraction < 0.0 || self.off_fraction < 0.0 {
            return Err("idle_fraction + off_fraction must lie in [0,1]".into());
        }
        if self.state_epoch_ticks == 0 {
            return Err("state_epoch_ticks must be at least 1".into());
        }
        Ok(())
    }

    pub fn timestamp_at(&self, tick: u64) -> i64 {
        self.start_ms + (tick as f64 * 1000.0 / self.tick_hz).round() as i64
    }

    /// Name of the `i`-th GPU node and CPU node.
    pub fn gpu_node_name(i: u32) -> String {
        format!("gpu-{:04}", i + 1)
    }

    pub fn cpu_node_name(i: u32) -> String {
        format!("cpu-{:04}", i + 1)
    }

    pub fn node_names(&self) -> Vec<String> {
        let gpu = (0..self.node_count).map(Self::gpu_node_name);
        let cpu = (0..self.cpu_node_count).map(Self::cpu_node_name);
        gpu.chain(cpu).collect()
    }
}

const USERS: [&str; 8] = ["alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi"];

#[derive(Debug, Clone, PartialEq)]
struct GpuWalk {
    util: f64,
    mem: f64,
    power: f64,
    temp: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct NodeWalk {
    cpu_load: f64,
    temp: f64,
    gpus: Vec<GpuWalk>,
}

#[derive(Debug, Clone, PartialEq)]
struct EnvWalk {
    humidity: f64,
    airflow: f64,
    temp: f64,
}

/// Stateful walker: sequential ticks cost O(1) each; random access restarts
/// from tick 0.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimulatorConfig,
    tick: u64,
    nodes: Vec<NodeWalk>,
    env: Vec<EnvWalk>,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn step(rng: &mut ChaCha8Rng, v: f64, size: f64, lo: f64, hi: f64) -> f64 {
    let mut next = v + rng.gen_range(-1.0..=1.0) * size;
    // reflect into range
    if next < lo {
        next = lo + (lo - next);
    }
    if next > hi {
        next = hi - (next - hi);
    }
    next.clamp(lo, hi)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let p = 10f64.powi(decimals);
    (v * p).round() / p
}

const TEMP_RANGE: (f64, f64) = (24.0, 88.0);
const GPU_TEMP_RANGE: (f64, f64) = (30.0, 95.0);
const POWER_RANGE: (f64, f64) = (50.0, 400.0);

impl Simulator {
    pub fn new(config: SimulatorConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0, 0));
        let total = config.node_count + config.cpu_node_count;
        let nodes = (0..total)
            .map(|i| {
                let gpus = if i < config.node_count { config.gpus_per_node } else { 0 };
                NodeWalk {
                    cpu_load: rng.gen_range(0.0..1.0),
                    temp: rng.gen_range(30.0..60.0),
                    gpus: (0..gpus)
                        .map(|_| GpuWalk {
                            util: rng.gen_range(0.0..1.0),
                            mem: rng.gen_range(0.0..1.0),
                            power: rng.gen_range(80.0..330.0),
                            temp: rng.gen_range(35.0..75.0),
                        })
                        .collect(),
                }
            })
            .collect();
        let env = (0..config.env_sensors)
            .map(|_| EnvWalk {
                humidity: rng.gen_range(30.0..60.0),
                airflow: rng.gen_range(1.0..2.0),
                temp: rng.gen_range(19.0..25.0),
            })
            .collect();
        Self {
            config,
            tick: 0,
            nodes,
            env,
        }
    }

    pub fn config(&self) -> &SimulatorConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    fn advance(&mut self) {
        self.tick += 1;
        let d = &self.config.drift;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.config.seed, self.tick, 1));
        for n in &mut self.nodes {
            n.cpu_load = step(&mut rng, n.cpu_load, d.cpu_load, 0.0, 1.0);
            n.temp = step(&mut rng, n.temp, d.node_temp_c, TEMP_RANGE.0, TEMP_RANGE.1);
            for g in &mut n.gpus {
                g.util = step(&mut rng, g.util, d.gpu_util, 0.0, 1.0);
                g.mem = step(&mut rng, g.mem, d.gpu_mem, 0.0, 1.0);
                g.power = step(&mut rng, g.power, d.gpu_power_w, POWER_RANGE.0, POWER_RANGE.1);
                g.temp = step(&mut rng, g.temp, d.gpu_temp_c, GPU_TEMP_RANGE.0, GPU_TEMP_RANGE.1);
            }
        }
        for e in &mut self.env {
            e.humidity = step(&mut rng, e.humidity, 0.5, 0.0, 100.0);
            e.airflow = step(&mut rng, e.airflow, 0.05, 0.2, 4.0);
            e.temp = step(&mut rng, e.temp, 0.2, 15.0, 35.0);
        }
    }

    /// Frame at tick `t`, walking forward (or restarting) as needed.
    pub fn frame_at(&mut self, t: u64) -> SnapshotFrame {
        if t < self.tick {
            *self = Simulator::new(self.config.clone());
        }
        while self.tick < t {
            self.advance();
        }
        self.current_frame()
    }

    /// Advances one tick and returns the new frame.
    pub fn next_frame(&mut self) -> SnapshotFrame {
        self.advance();
        self.current_frame()
    }

    pub fn current_frame(&self) -> SnapshotFrame {
        let cfg = &self.config;
        let timestamp = cfg.timestamp_at(self.tick);
        let epoch = self.tick / cfg.state_epoch_ticks;
        let mut frame = SnapshotFrame::new(timestamp);
        for (i, walk) in self.nodes.iter().enumerate() {
            let i = i as u32;
            let is_gpu = i < cfg.node_count;
            let name = if is_gpu {
                SimulatorConfig::gpu_node_name(i)
            } else {
                SimulatorConfig::cpu_node_name(i - cfg.node_count)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch, 2 + i as u64));
            let roll: f64 = rng.gen_range(0.0..1.0);
            let state = if roll < cfg.off_fraction {
                NodeState::Off
            } else if roll < cfg.off_fraction + cfg.idle_fraction {
                NodeState::Idle
            } else {
                NodeState::Active
            };
            let (user, job_id) = if state == NodeState::Active {
                let u = USERS[rng.gen_range(0..USERS.len())];
                (Some(u.to_string()), Some(format!("{}", 40_000 + rng.gen_range(0..5_000u32))))
            } else {
                (None, None)
            };
            let quiet = if state == NodeState::Active { 1.0 } else { 0.03 };
            let cap = cfg.gpu_mem_capacity_bytes;
            let gpus: Vec<GpuTelemetry> = walk
                .gpus
                .iter()
                .enumerate()
                .map(|(gi, g)| {
                    let mut gpu = GpuTelemetry {
                        gpu_index: gi as u32,
                        utilization: round_to(g.util * quiet, 4),
                        mem_used_bytes: ((g.mem * quiet * cap as f64).round() as u64).min(cap),
                        mem_capacity_bytes: cap,
                        power_draw_w: round_to(g.power, 1),
                        temp_c: round_to(g.temp, 1),
                    };
                    if state == NodeState::Off {
                        silence_gpu(&mut gpu);
                    }
                    gpu
                })
                .collect();
            let cpu_load = match state {
                NodeState::Off => 0.0,
                _ => round_to(walk.cpu_load * quiet, 4),
            };
            frame.insert(NodeTelemetry {
                node_name: name,
                kind: if gpus.is_empty() { NodeKind::CpuOnly } else { NodeKind::GpuAccelerated },
                state,
                cpu_load,
                node_temp_c: round_to(walk.temp, 1),
                alerts: Vec::new(),
                user,
                job_id,
                gpus,
            });
        }
        frame.env = self
            .env
            .iter()
            .enumerate()
            .map(|(i, e)| EnvTelemetry {
                sensor_id: format!("ecopod-{}", i + 1),
                humidity_pct: round_to(e.humidity, 1),
                airflow: round_to(e.airflow, 3),
                temp_c: round_to(e.temp, 1),
                timestamp,
            })
            .collect();
        frame
    }
}

/// Frame at tick `t`: a pure function of `(config, t)`.
pub fn simulate_tick(config: &SimulatorConfig, t: u64) -> SnapshotFrame {
    Simulator::new(config.clone()).frame_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let cfg = SimulatorConfig { seed: 42, node_count: 20, ..Default::default() };
        assert_eq!(simulate_tick(&cfg, 17), simulate_tick(&cfg, 17));
        let other = SimulatorConfig { seed: 43, ..cfg.clone() };
        assert_ne!(simulate_tick(&cfg, 17), simulate_tick(&other, 17));
    }

    #[test]
    fn reference_population() {
        let cfg = SimulatorConfig { node_count: 318, gpus_per_node: 2, ..Default::default() };
        let f = simulate_tick(&cfg, 0);
        assert_eq!(f.nodes.len(), 318);
        assert_eq!(f.gpu_count(), 636);
    }

    #[test]
    fn sequential_equals_random_access() {
        let cfg = SimulatorConfig { node_count: 8, cpu_node_count: 3, ..Default::default() };
        let mut sim = Simulator::new(cfg.clone());
        for t in 1..=50 {
            let seq = sim.next_frame();
            if t % 7 == 0 {
                assert_eq!(seq, simulate_tick(&cfg, t));
            }
        }
        assert_eq!(sim.frame_at(3), simulate_tick(&cfg, 3));
    }

    #[test]
    fn states_and_kinds() {
        let cfg = SimulatorConfig {
            node_count: 200,
            cpu_node_count: 50,
            idle_fraction: 0.2,
            off_fraction: 0.1,
            ..Default::default()
        };
        let f = simulate_tick(&cfg, 5);
        let off = f.nodes.values().filter(|n| n.state == NodeState::Off).count();
        let idle = f.nodes.values().filter(|n| n.state == NodeState::Idle).count();
        assert!(off > 5 && off < 50, "off = {off}");
        assert!(idle > 20 && idle < 90, "idle = {idle}");
        assert_eq!(f.nodes.values().filter(|n| n.kind == NodeKind::CpuOnly).count(), 50);
        assert!(f.violations().is_empty());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SimulatorConfig { node_count: 0, ..Default::default() }.validate().is_err());
        assert!(SimulatorConfig { tick_hz: 0.0, ..Default::default() }.validate().is_err());
        assert!(SimulatorConfig::default().validate().is_ok());
    }
}
