//! Single-channel intensity image used by the optical-flow tracker.

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, pixels: vec![0.0; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f32>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count mismatch");
        Self { width, height, pixels }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.pixels[y * self.width + x] = v;
    }

    /// Integer lookup with coordinates clamped to the frame border.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f32 {
        let xi = x.clamp(0, self.width as i64 - 1) as usize;
        let yi = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(xi, yi)
    }

    /// Bilinear sample at a real-valued position, clamped at the border.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xf = x.clamp(0.0, (self.width - 1) as f64);
        let yf = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xf.floor();
        let y0 = yf.floor();
        let ax = xf - x0;
        let ay = yf - y0;
        let x0 = x0 as i64;
        let y0 = y0 as i64;
        let p00 = f64::from(self.get_clamped(x0, y0));
        let p10 = f64::from(self.get_clamped(x0 + 1, y0));
        let p01 = f64::from(self.get_clamped(x0, y0 + 1));
        let p11 = f64::from(self.get_clamped(x0 + 1, y0 + 1));
        (1.0 - ax) * (1.0 - ay) * p00 + ax * (1.0 - ay) * p10 + (1.0 - ax) * ay * p01 + ax * ay * p11
    }
}
