//! Loading a fabric, driving its clock against the wall clock, serving HTTP.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use faultfabric::fabric::{ClockMode, FabricConfig};
use faultfabric::{fixtures, Fabric, Orchestrator};

use crate::api::{router, Shared};

/// Reads a topology from a file, or from a bundled fixture when `source`
/// names one (`minimal`, `ims`, `three_tier`, `two_tenants`) and no such file
/// exists.
pub fn load_topology(source: &str) -> Result<String, String> {
    let path = Path::new(source);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| format!("{source}: {e}"));
    }
    fixtures::by_name(source)
        .map(str::to_owned)
        .ok_or_else(|| format!("{source}: no such file or bundled topology"))
}

pub fn orchestrator(topology: &str, seed: u64) -> Result<Shared, String> {
    let config = FabricConfig {
        seed,
        ..FabricConfig::default()
    };
    let fabric = Fabric::from_json(topology, config).map_err(|e| e.to_string())?;
    Ok(Arc::new(Mutex::new(Orchestrator::new(fabric))))
}

/// Advances simulated time at `speed` simulated ms per wall ms until dropped.
pub struct Driver {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Driver {
    pub const TICK: Duration = Duration::from_millis(10);

    pub fn spawn(state: Shared, speed: f64) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            let origin = {
                let mut o = state.lock().unwrap_or_else(|p| p.into_inner());
                o.fabric_mut().set_clock_mode(ClockMode::WallAnchored);
                o.now()
            };
            let started = Instant::now();
            while !flag.load(Ordering::Relaxed) {
                std::thread::sleep(Self::TICK);
                let target = origin.plus_ms_f64(started.elapsed().as_secs_f64() * 1000.0 * speed);
                state.lock().unwrap_or_else(|p| p.into_inner()).advance(target);
            }
        });
        Driver {
            stop,
            thread: Some(thread),
        }
    }
}

impl Drop for Driver {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub async fn serve(listener: tokio::net::TcpListener, state: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// A server on its own runtime thread, used by `--local` and tests.
pub struct Embedded {
    pub addr: SocketAddr,
    pub state: Shared,
    _driver: Driver,
}

impl Embedded {
    pub fn start(state: Shared, speed: f64) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let served = state.clone();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
                let _ = serve(listener, served).await;
            });
        });
        Ok(Embedded {
            addr,
            _driver: Driver::spawn(state.clone(), speed),
            state,
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}
