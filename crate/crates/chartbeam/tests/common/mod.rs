// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use chartbeam::config::ExperimentConfig;

/// A small, fast experiment: 100 UEs, 4x4 array, 4 subcarriers.
pub fn tiny_config(out: &Path) -> ExperimentConfig {
    let mut cfg =
        ExperimentConfig { dataset_id: "tiny".into(), output_dir: out.to_path_buf(), ..ExperimentConfig::default() };
    cfg.scene.n_ue = 100;
    cfg.array.n_v = 4;
    cfg.array.n_h = 4;
    cfg.uplink.n_subcarriers = 4;
    cfg.downlink.n_subcarriers = 4;
    cfg.chart.n_neighbors = 8;
    cfg.network.rff.n_freq = 16;
    cfg.network.rff.hidden = 16;
    cfg.network.mlp.n_freq = 16;
    cfg.network.mlp.hidden = 16;
    cfg.train.batch_size = 16;
    cfg.train.epochs = 50;
    cfg.validate().unwrap();
    cfg
}
