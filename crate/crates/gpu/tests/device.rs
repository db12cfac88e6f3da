use ecsgfx_gpu::*;
use proptest::prelude::*;

fn bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|f| f.to_le_bytes()).collect()
}

fn target(device: &Device, w: u32, h: u32, format: TextureFormat) -> Texture {
    device
        .create_texture(&TextureDescriptor {
            label: Some("target"),
            size: Extent3d::new_2d(w, h),
            format,
            usage: TextureUsages::RENDER_ATTACHMENT | TextureUsages::COPY_SRC | TextureUsages::TEXTURE_BINDING,
        })
        .unwrap()
}

/// Copies a single-layer texture back to the host, dropping row padding.
fn read_back(device: &Device, tex: &Texture) -> Vec<u8> {
    let row = tex.width() * tex.format().block_size();
    let padded = row.div_ceil(COPY_BYTES_PER_ROW_ALIGNMENT) * COPY_BYTES_PER_ROW_ALIGNMENT;
    let buf = device
        .create_buffer(&BufferDescriptor {
            label: Some("readback"),
            size: padded as u64 * tex.height() as u64,
            usage: BufferUsages::COPY_DST | BufferUsages::MAP_READ,
        })
        .unwrap();
    let mut enc = device.create_command_encoder().unwrap();
    enc.copy_texture_to_buffer(tex, 0, &buf, 0, padded);
    device.queue().submit([enc.finish()]).unwrap();
    let data = buf.map_read().unwrap();
    (0..tex.height())
        .flat_map(|y| {
            let at = (y * padded) as usize;
            data[at..at + row as usize].to_vec()
        })
        .collect()
}

const COLOR_SHADER: &str = "
struct VOut {
    @builtin(position) pos: vec4<f32>,
    @location(0) color: vec4<f32>,
}
@vertex
fn vs(@location(0) p: vec4<f32>, @location(1) c: vec4<f32>) -> VOut {
    return VOut(p, c);
}
@fragment
fn fs(v: VOut) -> @location(0) vec4<f32> {
    return v.color;
}
";

fn color_pipeline(device: &Device, depth: Option<DepthStencilState>, cull: Option<Face>) -> RenderPipeline {
    let module = device.create_shader_module("color", COLOR_SHADER).unwrap();
    let buffers = [VertexBufferLayout {
        array_stride: 32,
        step_mode: VertexStepMode::Vertex,
        attributes: vec![
            VertexAttribute {
                format: VertexFormat::Float32x4,
                offset: 0,
                shader_location: 0,
            },
            VertexAttribute {
                format: VertexFormat::Float32x4,
                offset: 16,
                shader_location: 1,
            },
        ],
    }];
    device
        .create_render_pipeline(&RenderPipelineDescriptor {
            label: Some("color"),
            layout: None,
            vertex: VertexState {
                module: &module,
                entry_point: "vs",
                buffers: &buffers,
            },
            fragment: Some(FragmentState {
                module: &module,
                entry_point: "fs",
                targets: &[ColorTargetState {
                    format: TextureFormat::Rgba8Unorm,
                    blend: None,
                }],
            }),
            primitive: PrimitiveState {
                cull_mode: cull,
                ..Default::default()
            },
            depth_stencil: depth,
        })
        .unwrap()
}

/// Draws `verts` (x, y, z, w, r, g, b, a per vertex) into a cleared target and returns RGBA8 pixels.
fn draw_colored(w: u32, h: u32, verts: &[[f32; 8]], depth: bool, cull: Option<Face>) -> Vec<u8> {
    let device = Device::new();
    let color = target(&device, w, h, TextureFormat::Rgba8Unorm);
    let ds = depth.then_some(DepthStencilState {
        format: TextureFormat::Depth24Plus,
        depth_write_enabled: true,
        depth_compare: CompareFunction::Less,
    });
    let pipeline = color_pipeline(&device, ds, cull);
    let flat: Vec<f32> = verts.iter().flatten().copied().collect();
    let vb = device
        .create_buffer_init(Some("vb"), &bytes(&flat), BufferUsages::VERTEX)
        .unwrap();
    let depth_tex = depth.then(|| target(&device, w, h, TextureFormat::Depth24Plus));
    let mut enc = device.create_command_encoder().unwrap();
    {
        let mut pass = enc.begin_render_pass(&RenderPassDescriptor {
            label: None,
            color_attachments: vec![RenderPassColorAttachment {
                view: color.create_view(&Default::default()).unwrap(),
                load: LoadOp::Clear(Color::BLACK),
            }],
            depth_attachment: depth_tex.as_ref().map(|d| RenderPassDepthAttachment {
                view: d.create_view(&Default::default()).unwrap(),
                load: LoadOp::Clear(1.0),
            }),
        });
        pass.set_pipeline(&pipeline);
        pass.set_vertex_buffer(0, &vb, 0);
        pass.draw(0..verts.len() as u32, 0..1);
    }
    device.queue().submit([enc.finish()]).unwrap();
    read_back(&device, &color)
}

fn v(x: f32, y: f32, z: f32, rgb: [f32; 3]) -> [f32; 8] {
    [x, y, z, 1.0, rgb[0], rgb[1], rgb[2], 1.0]
}

#[test]
fn clear_color_reads_back_as_rounded_unorm() {
    let device = Device::new();
    let tex = target(&device, 256, 256, TextureFormat::Rgba8Unorm);
    let mut enc = device.create_command_encoder().unwrap();
    enc.begin_render_pass(&RenderPassDescriptor {
        label: Some("clear"),
        color_attachments: vec![RenderPassColorAttachment {
            view: tex.create_view(&Default::default()).unwrap(),
            load: LoadOp::Clear(Color {
                r: 0.2,
                g: 0.3,
                b: 0.4,
                a: 1.0,
            }),
        }],
        depth_attachment: None,
    });
    device.queue().submit([enc.finish()]).unwrap();
    let px = read_back(&device, &tex);
    assert_eq!(px.len(), 256 * 256 * 4);
    assert!(px.chunks_exact(4).all(|p| p == [51, 77, 102, 255]));
}

/// Pixel centers strictly inside a screen-space triangle, computed in f64.
fn oracle_inside(w: u32, h: u32, tri: [(f64, f64); 3], px: u32, py: u32) -> Option<bool> {
    let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
    let to_screen = |(x, y): (f64, f64)| ((x + 1.0) * 0.5 * w as f64, (1.0 - y) * 0.5 * h as f64);
    let p: Vec<(f64, f64)> = tri.iter().map(|&t| to_screen(t)).collect();
    let e = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (cy - a.1) - (b.1 - a.1) * (cx - a.0);
    let es = [e(p[1], p[2]), e(p[2], p[0]), e(p[0], p[1])];
    let eps = 1e-3 * w.max(h) as f64;
    if es.iter().any(|x| x.abs() < eps) {
        return None;
    }
    Some(es.iter().all(|&x| x > 0.0) || es.iter().all(|&x| x < 0.0))
}

#[test]
fn triangle_coverage_matches_edge_function_oracle() {
    let tri = [(-0.83, -0.71), (0.77, -0.42), (-0.12, 0.91)];
    let (w, h) = (64, 48);
    let px = draw_colored(
        w,
        h,
        &tri.map(|(x, y)| v(x as f32, y as f32, 0.5, [1.0, 1.0, 1.0])),
        false,
        None,
    );
    let mut checked = 0;
    for y in 0..h {
        for x in 0..w {
            if let Some(inside) = oracle_inside(w, h, tri, x, y) {
                let lit = px[((y * w + x) * 4) as usize] == 255;
                assert_eq!(lit, inside, "pixel ({x}, {y})");
                checked += 1;
            }
        }
    }
    assert!(checked > (w * h) as usize * 9 / 10);
}

#[test]
fn colors_interpolate_linearly_for_affine_positions() {
    // Full-screen triangle with red varying as x; at w = 1 interpolation is affine.
    let (w, h) = (32, 32);
    let verts = [
        v(-1.0, -1.0, 0.5, [0.0, 0.0, 0.0]),
        v(3.0, -1.0, 0.5, [2.0, 0.0, 0.0]),
        v(-1.0, 3.0, 0.5, [0.0, 0.0, 0.0]),
    ];
    let px = draw_colored(w, h, &verts, false, None);
    for x in 0..w {
        let expect = ((x as f32 + 0.5) / w as f32 * 255.0).round() as i32;
        let got = px[((5 * w + x) * 4) as usize] as i32;
        assert!((got - expect).abs() <= 1, "x={x}: {got} vs {expect}");
    }
}

#[test]
fn perspective_correct_interpolation() {
    // A triangle whose right vertex is far away (large w): the varying must
    // follow the perspective-correct formula, not screen-space lerp.
    let (w, h) = (64, 8);
    let far_w = 4.0f32;
    let verts = [
        [-1.0, -1.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0],
        [far_w, -far_w, 0.5 * far_w, far_w, 1.0, 0.0, 0.0, 1.0],
        [-1.0, 3.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0],
    ];
    let px = draw_colored(w, h, &verts, false, None);
    // Along the bottom row the edge runs from ndc x=-1 (w=1, r=0) to ndc x=1 (w=4, r=1).
    let y = h - 1;
    for x in [8u32, 24, 40, 56] {
        let ndc_x = (x as f64 + 0.5) / w as f64 * 2.0 - 1.0;
        let ndc_y = 1.0 - (y as f64 + 0.5) / h as f64 * 2.0;
        // Screen-space barycentrics, then perspective correction, in f64.
        let s = |(x, y): (f64, f64)| (x, y);
        let a = s((-1.0, -1.0));
        let b = s((1.0, -1.0));
        let c = s((-1.0, 3.0));
        let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        let lb = ((c.0 - a.0) * (ndc_y - a.1) - (c.1 - a.1) * (ndc_x - a.0)) / -area;
        let lc = ((b.0 - a.0) * (ndc_y - a.1) - (b.1 - a.1) * (ndc_x - a.0)) / area;
        let la = 1.0 - lb - lc;
        let ws = [1.0, far_w as f64, 1.0];
        let q = [la / ws[0], lb / ws[1], lc / ws[2]];
        let r = q[1] / (q[0] + q[1] + q[2]);
        let expect = (r * 255.0).round() as i32;
        let got = px[((y * w + x) * 4) as usize] as i32;
        assert!((got - expect).abs() <= 1, "x={x}: {got} vs {expect}");
    }
}

#[test]
fn depth_test_keeps_nearest_regardless_of_order() {
    let quad = |z: f32, rgb: [f32; 3]| {
        [
            v(-1.0, -1.0, z, rgb),
            v(1.0, -1.0, z, rgb),
            v(1.0, 1.0, z, rgb),
            v(-1.0, -1.0, z, rgb),
            v(1.0, 1.0, z, rgb),
            v(-1.0, 1.0, z, rgb),
        ]
    };
    let near = quad(0.25, [0.0, 1.0, 0.0]);
    let far = quad(0.75, [1.0, 0.0, 0.0]);
    for order in [[near, far], [far, near]] {
        let verts: Vec<[f32; 8]> = order.iter().flatten().copied().collect();
        let px = draw_colored(16, 16, &verts, true, None);
        assert!(px.chunks_exact(4).all(|p| p == [0, 255, 0, 255]));
    }
}

#[test]
fn back_faces_are_culled() {
    // Clockwise in normalized device coordinates.
    let cw = [
        v(-1.0, -1.0, 0.5, [1.0, 1.0, 1.0]),
        v(-1.0, 1.0, 0.5, [1.0, 1.0, 1.0]),
        v(1.0, -1.0, 0.5, [1.0, 1.0, 1.0]),
    ];
    let kept = draw_colored(8, 8, &cw, false, None);
    assert!(kept.chunks_exact(4).any(|p| p[0] == 255));
    let culled = draw_colored(8, 8, &cw, false, Some(Face::Back));
    assert!(culled.chunks_exact(4).all(|p| p[0] == 0));
}

#[test]
fn triangles_crossing_the_near_plane_are_clipped() {
    // The third vertex sits behind the eye. Clipping at z = 0 cuts both of its
    // edges at t = 1/3, giving the screen-space trapezoid (-0.5,-0.5) (0.5,-0.5) (1,1) (-1,1).
    let verts = [
        [-0.5, -0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0],
        [0.5, -0.5, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0],
        [0.0, 2.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0],
    ];
    let (w, h) = (32, 32);
    let px = draw_colored(w, h, &verts, false, None);
    let halves = [
        [(-0.5, -0.5), (0.5, -0.5), (1.0, 1.0)],
        [(-0.5, -0.5), (1.0, 1.0), (-1.0, 1.0)],
    ];
    let mut lit_count = 0;
    for y in 0..h {
        for x in 0..w {
            let lit = px[((y * w + x) * 4) as usize] == 255;
            lit_count += lit as u32;
            let a = oracle_inside(w, h, halves[0], x, y);
            let b = oracle_inside(w, h, halves[1], x, y);
            if let (Some(a), Some(b)) = (a, b) {
                assert_eq!(lit, a || b, "pixel ({x}, {y})");
            }
        }
    }
    assert!(lit_count > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Two triangles sharing an edge cover every pixel at most once and leave no gaps.
    #[test]
    fn shared_edges_are_watertight(
        a in (-1.0f32..1.0, -1.0f32..1.0),
        b in (-1.0f32..1.0, -1.0f32..1.0),
        c in (-1.0f32..1.0, -1.0f32..1.0),
        d in (-1.0f32..1.0, -1.0f32..1.0),
    ) {
        let (w, h) = (24u32, 24u32);
        let mk = |p: (f32, f32), rgb| v(p.0, p.1, 0.5, rgb);
        let first = draw_colored(w, h, &[mk(a, [1.0, 1.0, 1.0]), mk(b, [1.0, 1.0, 1.0]), mk(c, [1.0, 1.0, 1.0])], false, None);
        let second = draw_colored(w, h, &[mk(c, [1.0, 1.0, 1.0]), mk(b, [1.0, 1.0, 1.0]), mk(d, [1.0, 1.0, 1.0])], false, None);
        let side = |p: (f32, f32)| {
            ((c.0 - b.0) as f64) * ((p.1 - b.1) as f64) - ((c.1 - b.1) as f64) * ((p.0 - b.0) as f64)
        };
        // Only meaningful when a and d lie on opposite sides of the shared edge.
        prop_assume!(side(a) * side(d) < 0.0);
        let to_f64 = |p: (f32, f32)| (p.0 as f64, p.1 as f64);
        for y in 0..h {
            for x in 0..w {
                let i = ((y * w + x) * 4) as usize;
                let (p, q) = (first[i] == 255, second[i] == 255);
                prop_assert!(!(p && q), "pixel ({}, {}) covered twice", x, y);
                let in_first = oracle_inside(w, h, [to_f64(a), to_f64(b), to_f64(c)], x, y);
                let in_second = oracle_inside(w, h, [to_f64(c), to_f64(b), to_f64(d)], x, y);
                if let (Some(i1), Some(i2)) = (in_first, in_second) {
                    prop_assert_eq!(p || q, i1 || i2, "pixel ({}, {})", x, y);
                }
            }
        }
    }
}

const GRAYSCALE: &str = "
@group(0) @binding(0) var src: texture_2d<f32>;
@group(0) @binding(1) var dst: texture_storage_2d<rgba8unorm, write>;
@compute @workgroup_size(8, 8)
fn main(@builtin(global_invocation_id) id: vec3<u32>) {
    let size = textureDimensions(src);
    if (id.x >= size.x || id.y >= size.y) { return; }
    let c = textureLoad(src, vec2<i32>(id.xy), 0);
    let y = dot(c.rgb, vec3<f32>(0.2126, 0.7152, 0.0722));
    textureStore(dst, vec2<i32>(id.xy), vec4<f32>(y, y, y, c.a));
}
";

#[test]
fn compute_grayscale_filter() {
    let device = Device::new();
    let (w, h) = (13u32, 7u32);
    let make = |usage| {
        device
            .create_texture(&TextureDescriptor {
                label: None,
                size: Extent3d::new_2d(w, h),
                format: TextureFormat::Rgba8Unorm,
                usage,
            })
            .unwrap()
    };
    let src = make(TextureUsages::TEXTURE_BINDING | TextureUsages::COPY_DST);
    let dst = make(TextureUsages::STORAGE_BINDING | TextureUsages::COPY_SRC);
    let pixels: Vec<u8> = (0..w * h)
        .flat_map(|i| [(i * 37 % 256) as u8, (i * 91 % 256) as u8, (i * 13 % 256) as u8, 255])
        .collect();
    let mut upload = pixels.clone();
    upload[..4].copy_from_slice(&[255, 0, 0, 255]);
    device.queue().write_texture(&src, 0, &upload, w * 4).unwrap();

    let module = device.create_shader_module("gray", GRAYSCALE).unwrap();
    let pipeline = device
        .create_compute_pipeline(&ComputePipelineDescriptor {
            label: Some("gray"),
            layout: None,
            module: &module,
            entry_point: "main",
        })
        .unwrap();
    let group = device
        .create_bind_group(
            &pipeline.get_bind_group_layout(0).unwrap(),
            &[
                BindGroupEntry {
                    binding: 0,
                    resource: BindingResource::TextureView(src.create_view(&Default::default()).unwrap()),
                },
                BindGroupEntry {
                    binding: 1,
                    resource: BindingResource::TextureView(dst.create_view(&Default::default()).unwrap()),
                },
            ],
        )
        .unwrap();
    let mut enc = device.create_command_encoder().unwrap();
    {
        let mut pass = enc.begin_compute_pass();
        pass.set_pipeline(&pipeline);
        pass.set_bind_group(0, &group);
        pass.dispatch_workgroups(w.div_ceil(8), h.div_ceil(8), 1);
    }
    device.queue().submit([enc.finish()]).unwrap();
    let out = read_back(&device, &dst);
    assert_eq!(&out[..4], &[54, 54, 54, 255]);
    for (i, (o, p)) in out.chunks_exact(4).zip(upload.chunks_exact(4)).enumerate() {
        let y = 0.2126 * p[0] as f64 / 255.0 + 0.7152 * p[1] as f64 / 255.0 + 0.0722 * p[2] as f64 / 255.0;
        let expect = (y * 255.0).round() as i32;
        assert!((o[0] as i32 - expect).abs() <= 1, "texel {i}");
        assert_eq!(o[0], o[1]);
        assert_eq!(o[1], o[2]);
    }
    assert_eq!(device.stats().dispatches, 1);
}

#[test]
fn textured_quad_with_nearest_sampling_reproduces_texels() {
    let device = Device::new();
    let tex = device
        .create_texture(&TextureDescriptor {
            label: Some("checker"),
            size: Extent3d::new_2d(4, 4),
            format: TextureFormat::Rgba8Unorm,
            usage: TextureUsages::TEXTURE_BINDING | TextureUsages::COPY_DST,
        })
        .unwrap();
    let texels: Vec<u8> = (0..16u8).flat_map(|i| [i * 16, 255 - i * 16, i, 255]).collect();
    device.queue().write_texture(&tex, 0, &texels, 16).unwrap();
    let src = "
        struct VOut { @builtin(position) pos: vec4<f32>, @location(0) uv: vec2<f32> }
        @vertex fn vs(@builtin(vertex_index) i: u32) -> VOut {
            let uv = vec2<f32>(f32((i << 1u) & 2u), f32(i & 2u));
            return VOut(vec4<f32>(uv.x * 2.0 - 1.0, 1.0 - uv.y * 2.0, 0.5, 1.0), uv);
        }
        @group(0) @binding(0) var t: texture_2d<f32>;
        @group(0) @binding(1) var s: sampler;
        @fragment fn fs(v: VOut) -> @location(0) vec4<f32> { return textureSample(t, s, v.uv); }
    ";
    let module = device.create_shader_module("tex", src).unwrap();
    let pipeline = device
        .create_render_pipeline(&RenderPipelineDescriptor {
            label: None,
            layout: None,
            vertex: VertexState {
                module: &module,
                entry_point: "vs",
                buffers: &[],
            },
            fragment: Some(FragmentState {
                module: &module,
                entry_point: "fs",
                targets: &[ColorTargetState {
                    format: TextureFormat::Rgba8Unorm,
                    blend: None,
                }],
            }),
            primitive: PrimitiveState::default(),
            depth_stencil: None,
        })
        .unwrap();
    let sampler = device.create_sampler(&SamplerDescriptor::default()).unwrap();
    let group = device
        .create_bind_group(
            &pipeline.get_bind_group_layout(0).unwrap(),
            &[
                BindGroupEntry {
                    binding: 0,
                    resource: BindingResource::TextureView(tex.create_view(&Default::default()).unwrap()),
                },
                BindGroupEntry {
                    binding: 1,
                    resource: BindingResource::Sampler(sampler),
                },
            ],
        )
        .unwrap();
    let out_tex = target(&device, 16, 16, TextureFormat::Rgba8Unorm);
    let mut enc = device.create_command_encoder().unwrap();
    {
        let mut pass = enc.begin_render_pass(&RenderPassDescriptor {
            label: None,
            color_attachments: vec![RenderPassColorAttachment {
                view: out_tex.create_view(&Default::default()).unwrap(),
                load: LoadOp::Clear(Color::BLACK),
            }],
            depth_attachment: None,
        });
        pass.set_pipeline(&pipeline);
        pass.set_bind_group(0, &group);
        pass.draw(0..3, 0..1);
    }
    device.queue().submit([enc.finish()]).unwrap();
    let out = read_back(&device, &out_tex);
    // The full-screen triangle maps uv 0..1 onto the 16x16 target; each texel covers 4x4 pixels.
    for y in 0..16u32 {
        for x in 0..16u32 {
            let t = ((y / 4) * 4 + x / 4) as usize;
            let o = ((y * 16 + x) * 4) as usize;
            assert_eq!(&out[o..o + 4], &texels[t * 4..t * 4 + 4], "pixel ({x}, {y})");
        }
    }
}

#[test]
fn instanced_draws_count_instances() {
    let device = Device::new();
    let src = "
        @vertex fn vs(@location(0) p: vec2<f32>, @location(1) offset: f32) -> @builtin(position) vec4<f32> {
            return vec4<f32>(p.x * 0.1 + offset, p.y * 0.1, 0.5, 1.0);
        }
        @fragment fn fs() -> @location(0) vec4<f32> { return vec4<f32>(1.0); }
    ";
    let module = device.create_shader_module("inst", src).unwrap();
    let buffers = [
        VertexBufferLayout {
            array_stride: 8,
            step_mode: VertexStepMode::Vertex,
            attributes: vec![VertexAttribute {
                format: VertexFormat::Float32x2,
                offset: 0,
                shader_location: 0,
            }],
        },
        VertexBufferLayout {
            array_stride: 4,
            step_mode: VertexStepMode::Instance,
            attributes: vec![VertexAttribute {
                format: VertexFormat::Float32,
                offset: 0,
                shader_location: 1,
            }],
        },
    ];
    let pipeline = device
        .create_render_pipeline(&RenderPipelineDescriptor {
            label: None,
            layout: None,
            vertex: VertexState {
                module: &module,
                entry_point: "vs",
                buffers: &buffers,
            },
            fragment: Some(FragmentState {
                module: &module,
                entry_point: "fs",
                targets: &[ColorTargetState {
                    format: TextureFormat::Rgba8Unorm,
                    blend: None,
                }],
            }),
            primitive: PrimitiveState::default(),
            depth_stencil: None,
        })
        .unwrap();
    let quad = device
        .create_buffer_init(None, &bytes(&[-1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0]), BufferUsages::VERTEX)
        .unwrap();
    let index: Vec<u8> = [0u16, 1, 2, 0, 2, 3].iter().flat_map(|i| i.to_le_bytes()).collect();
    let ib = device.create_buffer_init(None, &index, BufferUsages::INDEX).unwrap();
    let offsets = device
        .create_buffer_init(None, &bytes(&[-0.5, 0.0, 0.5]), BufferUsages::VERTEX)
        .unwrap();
    let out = target(&device, 40, 40, TextureFormat::Rgba8Unorm);
    let mut enc = device.create_command_encoder().unwrap();
    {
        let mut pass = enc.begin_render_pass(&RenderPassDescriptor {
            label: None,
            color_attachments: vec![RenderPassColorAttachment {
                view: out.create_view(&Default::default()).unwrap(),
                load: LoadOp::Clear(Color::BLACK),
            }],
            depth_attachment: None,
        });
        pass.set_pipeline(&pipeline);
        pass.set_vertex_buffer(0, &quad, 0);
        pass.set_vertex_buffer(1, &offsets, 0);
        pass.set_index_buffer(&ib, IndexFormat::Uint16, 0);
        pass.draw_indexed(0..6, 0, 0..3);
    }
    device.queue().submit([enc.finish()]).unwrap();
    let stats = device.stats();
    assert_eq!(stats.draw_calls, 1);
    assert_eq!(stats.instances, 3);
    let px = read_back(&device, &out);
    let lit = |x: u32, y: u32| px[((y * 40 + x) * 4) as usize] == 255;
    // Instance centers land at pixel x = 10, 20 and 30 on the middle row.
    assert!(lit(10, 20) && lit(20, 20) && lit(30, 20));
    assert!(!lit(15, 20) && !lit(25, 20));
}

#[test]
fn record_time_errors_surface_at_submit() {
    let device = Device::new();
    let tex = target(&device, 10, 10, TextureFormat::Rgba8Unorm);
    let buf = device
        .create_buffer(&BufferDescriptor {
            label: None,
            size: 4096,
            usage: BufferUsages::COPY_DST | BufferUsages::MAP_READ,
        })
        .unwrap();
    let mut enc = device.create_command_encoder().unwrap();
    enc.copy_texture_to_buffer(&tex, 0, &buf, 0, 40);
    let err = device.queue().submit([enc.finish()]).unwrap_err();
    assert!(matches!(err, GpuError::Validation { .. }), "{err}");
}

#[test]
fn lost_devices_refuse_work() {
    let device = Device::new();
    device.lose();
    assert!(matches!(
        device.create_command_encoder(),
        Err(GpuError::DeviceLost)
    ));
    assert!(matches!(device.queue().submit([]), Err(GpuError::DeviceLost)));
}

#[test]
fn live_bytes_track_resource_lifetimes() {
    let device = Device::new();
    let before = device.stats().live_bytes;
    let tex = target(&device, 16, 16, TextureFormat::Rgba8Unorm);
    assert_eq!(device.stats().live_bytes, before + 16 * 16 * 4);
    drop(tex);
    assert_eq!(device.stats().live_bytes, before);
}

#[test]
fn zero_sized_textures_are_rejected() {
    let device = Device::new();
    let err = device
        .create_texture(&TextureDescriptor {
            label: Some("empty"),
            size: Extent3d::new_2d(0, 4),
            format: TextureFormat::Rgba8Unorm,
            usage: TextureUsages::TEXTURE_BINDING,
        })
        .unwrap_err();
    assert!(matches!(err, GpuError::Validation { .. }));
}
