//! Shared fixtures for the criterion benchmarks.

use ecsgfx::bench;
use ecsgfx::gallery::default_assets_root;
use ecsgfx::gpu::Device;
use ecsgfx::{OffscreenTarget, Renderer, Resources, Result, Scene};

/// A benchmark scene with everything needed to render it repeatedly.
pub struct FrameFixture {
    pub scene: Scene,
    pub resources: Resources,
    pub renderer: Renderer,
    pub target: OffscreenTarget,
}

impl FrameFixture {
    pub fn new(index: usize, size: u32) -> Result<Self> {
        let device = Device::new();
        let mut resources = Resources::new(&device, default_assets_root())?;
        bench::register_bench_resources(&mut resources)?;
        let scene = bench::build_bench_scene(index)?;
        let renderer = Renderer::new(&resources)?;
        let target = OffscreenTarget::new(&device, size, size)?;
        Ok(FrameFixture {
            scene,
            resources,
            renderer,
            target,
        })
    }
}
