use glam::DVec3;

/// Geometry to draw, by mesh name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshComponent {
    pub mesh: String,
}

impl MeshComponent {
    pub fn new(mesh: impl Into<String>) -> Self {
        MeshComponent { mesh: mesh.into() }
    }
}

/// Surface appearance, by material name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MaterialComponent {
    pub material: String,
}

impl MaterialComponent {
    pub fn new(material: impl Into<String>) -> Self {
        MaterialComponent {
            material: material.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Projection {
    #[default]
    Perspective,
    Orthographic,
}

/// A camera looking down its local -Z axis.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraComponent {
    pub projection: Projection,
    /// Vertical field of view in degrees, for perspective cameras.
    pub fov_y: f64,
    /// Height of the view volume in world units, for orthographic cameras.
    pub ortho_height: f64,
    pub near: f64,
    pub far: f64,
    pub primary: bool,
}

impl Default for CameraComponent {
    fn default() -> Self {
        CameraComponent {
            projection: Projection::Perspective,
            fov_y: 45.0,
            ortho_height: 10.0,
            near: 0.1,
            far: 100.0,
            primary: true,
        }
    }
}

impl CameraComponent {
    pub fn perspective(fov_y: f64, near: f64, far: f64) -> Self {
        CameraComponent {
            fov_y,
            near,
            far,
            ..Default::default()
        }
    }

    /// Projection matrix with a 0..1 depth range.
    pub fn projection_matrix(&self, aspect: f64) -> glam::DMat4 {
        match self.projection {
            Projection::Perspective => glam::DMat4::perspective_rh(self.fov_y.to_radians(), aspect, self.near, self.far),
            Projection::Orthographic => {
                let h = self.ortho_height / 2.0;
                let w = h * aspect;
                glam::DMat4::orthographic_rh(-w, w, -h, h, self.near, self.far)
            }
        }
    }
}

/// A directional light.
#[derive(Clone, Debug, PartialEq)]
pub struct LightComponent {
    /// Direction the light travels in.
    pub direction: DVec3,
    pub color: DVec3,
    pub intensity: f64,
    pub casts_shadows: bool,
}

impl Default for LightComponent {
    fn default() -> Self {
        LightComponent {
            direction: DVec3::new(-0.4, -1.0, -0.3),
            color: DVec3::ONE,
            intensity: 1.0,
            casts_shadows: false,
        }
    }
}

impl LightComponent {
    pub fn directional(direction: DVec3) -> Self {
        LightComponent {
            direction,
            ..Default::default()
        }
    }

    pub fn with_shadows(mut self, on: bool) -> Self {
        self.casts_shadows = on;
        self
    }

    /// Unit vector pointing from surfaces towards the light.
    pub fn to_light(&self) -> DVec3 {
        -self.direction.normalize()
    }

    pub fn radiance(&self) -> DVec3 {
        self.color * self.intensity
    }
}

/// Background cubemap, drawn behind everything.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SkyboxComponent {
    pub cubemap: String,
}

impl SkyboxComponent {
    pub fn new(cubemap: impl Into<String>) -> Self {
        SkyboxComponent {
            cubemap: cubemap.into(),
        }
    }
}
