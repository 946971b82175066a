//! Fragment sampling (one random mini-patch per grid cell, stitched) and
//! non-overlapping patch extraction.

use rand::Rng;

use super::image::Image;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_GRID: usize = 7;
pub const DEFAULT_MINIPATCH: usize = 32;

/// Mini-patch offsets for every cell of a `grid_n x grid_n` grid laid over an
/// image of a fixed size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentPlan {
    grid_n: usize,
    minipatch: usize,
    source_h: usize,
    source_w: usize,
    offsets: Vec<(usize, usize)>,
    seed: u64,
}

impl FragmentPlan {
    /// Draws offsets uniformly so each mini-patch stays inside its cell.
    pub fn random(grid_n: usize, minipatch: usize, source_h: usize, source_w: usize, seed: u64) -> Result<Self> {
        let (cell_h, cell_w) = Self::cells(grid_n, minipatch, source_h, source_w)?;
        let mut r = rng::stream(seed, 0, "fragment");
        let offsets = (0..grid_n * grid_n)
            .map(|_| {
                (
                    r.random_range(0..=cell_h - minipatch),
                    r.random_range(0..=cell_w - minipatch),
                )
            })
            .collect();
        Ok(Self {
            grid_n,
            minipatch,
            source_h,
            source_w,
            offsets,
            seed,
        })
    }

    /// Plan that takes the top-left mini-patch of every cell.
    pub fn zero(grid_n: usize, minipatch: usize, source_h: usize, source_w: usize) -> Result<Self> {
        Self::cells(grid_n, minipatch, source_h, source_w)?;
        Ok(Self {
            grid_n,
            minipatch,
            source_h,
            source_w,
            offsets: vec![(0, 0); grid_n * grid_n],
            seed: 0,
        })
    }

    fn cells(grid_n: usize, minipatch: usize, h: usize, w: usize) -> Result<(usize, usize)> {
        if grid_n == 0 || minipatch == 0 {
            return Err(Error::InvalidArgument("fragment grid and mini-patch must be positive".into()));
        }
        let side = grid_n * minipatch;
        if h < side || w < side {
            return Err(Error::TooSmall(format!(
                "{h}x{w} image cannot hold a {grid_n}x{grid_n} grid of {minipatch}-pixel mini-patches"
            )));
        }
        Ok((h / grid_n, w / grid_n))
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn minipatch(&self) -> usize {
        self.minipatch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn offsets(&self) -> &[(usize, usize)] {
        &self.offsets
    }

    /// Side of the stitched output.
    pub fn output_side(&self) -> usize {
        self.grid_n * self.minipatch
    }

    pub fn cell_size(&self) -> (usize, usize) {
        (self.source_h / self.grid_n, self.source_w / self.grid_n)
    }
}

/// Stitches one mini-patch per grid cell, in row-major cell order.
pub fn fragment(img: &Image, plan: &FragmentPlan) -> Result<Image> {
    if img.height() != plan.source_h || img.width() != plan.source_w {
        return Err(Error::Dimension(format!(
            "plan built for {}x{}, image is {}x{}",
            plan.source_h,
            plan.source_w,
            img.height(),
            img.width()
        )));
    }
    let (cell_h, cell_w) = plan.cell_size();
    let (m, g, c) = (plan.minipatch, plan.grid_n, img.channels());
    let side = plan.output_side();
    let mut data = vec![0.0; side * side * c];
    for gy in 0..g {
        for gx in 0..g {
            let (oy, ox) = plan.offsets[gy * g + gx];
            let (sy, sx) = (gy * cell_h + oy, gx * cell_w + ox);
            for r in 0..m {
                let src = ((sy + r) * img.width() + sx) * c;
                let dst = ((gy * m + r) * side + gx * m) * c;
                data[dst..dst + m * c].copy_from_slice(&img.data()[src..src + m * c]);
            }
        }
    }
    Image::new(side, side, c, data)
}

/// All `side x side` patches on a `stride` lattice; partial border patches are dropped.
pub fn extract_patches(img: &Image, side: usize, stride: usize) -> Result<Vec<Image>> {
    if side == 0 || stride == 0 {
        return Err(Error::InvalidArgument("patch side and stride must be positive".into()));
    }
    if img.height() < side || img.width() < side {
        return Err(Error::TooSmall(format!(
            "{}x{} image is smaller than a {side}x{side} patch",
            img.height(),
            img.width()
        )));
    }
    let mut out = Vec::new();
    let mut r = 0;
    while r + side <= img.height() {
        let mut c = 0;
        while c + side <= img.width() {
            out.push(img.crop(r, c, side, side)?);
            c += stride;
        }
        r += stride;
    }
    Ok(out)
}
