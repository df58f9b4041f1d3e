//! Shared image substrate: rasters, thresholding, components, contours and skeletons.

mod components;
mod contour;
mod image;
mod skeleton;
mod threshold;

pub use components::{connected_components, label_components, Component};
pub use contour::{
    chain_code, code_step, trace_contours, trace_contours_with, Contour, Point, TraceOptions,
};
pub use image::{load_gray, luma, BinaryImage, GrayImage, LUMA_WEIGHTS};
pub use skeleton::{crossing_number, skeletonize, skeletonize_with, thin, Junction, Skeleton, SkeletonOptions};
pub use threshold::{apply_threshold, binarize, binarize_page, load_binary, otsu_from_histogram, otsu_threshold, sauvola, Polarity};
