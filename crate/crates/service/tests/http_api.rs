//! End-to-end API tests against an in-process server.

use std::time::Duration;

use exosquat_api::{ControllerSpec, JobKind, JobRequest, JobStatus};
use exosquat_core::RunConfig;

async fn start() -> (String, tempdir::TempDir) {
    let dir = tempdir::TempDir::new();
    let (addr, _handle) = exosquat_service::serve("127.0.0.1:0".parse().unwrap(), dir.path.clone())
        .await
        .unwrap();
    (format!("http://{addr}"), dir)
}

/// Minimal scoped temp dir so test runs do not collide.
mod tempdir {
    use std::path::PathBuf;

    pub struct TempDir {
        pub path: PathBuf,
    }

    impl TempDir {
        pub fn new() -> Self {
            let path = std::env::temp_dir().join(format!(
                "exosquat-svc-test-{}-{:?}",
                std::process::id(),
                std::thread::current().id()
            ));
            std::fs::create_dir_all(&path).unwrap();
            Self { path }
        }
    }

    impl Drop for TempDir {
        fn drop(&mut self) {
            std::fs::remove_dir_all(&self.path).ok();
        }
    }
}

async fn wait_done(client: &reqwest::Client, base: &str, id: u64) -> serde_json::Value {
    for _ in 0..2400 {
        let summary: serde_json::Value =
            client.get(format!("{base}/api/v1/jobs/{id}")).send().await.unwrap().json().await.unwrap();
        let status = summary["status"].as_str().unwrap().to_string();
        if status != "queued" && status != "running" {
            return summary;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    panic!("job {id} did not finish");
}

#[tokio::test]
async fn health_and_presets() {
    let (base, _dir) = start().await;
    let client = reqwest::Client::new();
    let health: serde_json::Value =
        client.get(format!("{base}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");

    let presets: Vec<String> =
        client.get(format!("{base}/api/v1/presets")).send().await.unwrap().json().await.unwrap();
    assert!(presets.contains(&"case1".to_string()));
    assert!(presets.contains(&"desk".to_string()));
}

#[tokio::test]
async fn compute_endpoints_match_worked_examples() {
    let (base, _dir) = start().await;
    let client = reqwest::Client::new();

    // CoP of the (10, 20, 30, 40) N corner loading.
    let corners = [[0.055, 0.035, 0.0], [0.055, -0.035, 0.0], [-0.055, 0.035, 0.0], [-0.055, -0.035, 0.0]];
    let forces = [[0.0, 0.0, 10.0], [0.0, 0.0, 20.0], [0.0, 0.0, 30.0], [0.0, 0.0, 40.0]];
    let request = serde_json::json!({
        "forces": { "feet": [{
            "foot": 0,
            "sensor_world": corners,
            "force_world": forces,
            "normal": [0.0, 0.0, 1.0],
            "total_normal": 100.0,
            "foot_rotation": [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]],
            "foot_position": [0.0, 0.0, 0.0],
        }]}
    });
    let cop: serde_json::Value = client
        .post(format!("{base}/api/v1/compute/cop"))
        .json(&request)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let c = cop["feet"][0]["cop"].as_array().unwrap();
    assert!((c[0].as_f64().unwrap() - (-0.022)).abs() < 1e-12);
    assert!((c[1].as_f64().unwrap() - (-0.007)).abs() < 1e-12);

    // PD torque worked example: clipped at 100.
    let pd: serde_json::Value = client
        .post(format!("{base}/api/v1/compute/pd-torque"))
        .json(&serde_json::json!({ "target": [0.2], "position": [0.0], "velocity": [1.0] }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(pd["torque"][0].as_f64().unwrap(), 100.0);

    // GAE single terminal step: δ = 1 − 0.5 = 0.5.
    let gae: serde_json::Value = client
        .post(format!("{base}/api/v1/compute/gae"))
        .json(&serde_json::json!({
            "rewards": [1.0], "values": [0.5], "dones": [true],
            "gamma": 0.99, "lambda": 0.95
        }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!((gae["advantages"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);

    // Mismatched pd lengths are a 400.
    let bad = client
        .post(format!("{base}/api/v1/compute/pd-torque"))
        .json(&serde_json::json!({ "target": [0.2, 0.3], "position": [0.0], "velocity": [1.0] }))
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status(), 400);
}

#[tokio::test]
async fn check_job_runs_to_completion() {
    let (base, dir) = start().await;
    let client = reqwest::Client::new();
    let request = JobRequest {
        kind: JobKind::Check,
        config: RunConfig::case1(),
        controller: ControllerSpec::Playback,
        out_dir: None,
        label: String::new(),
    };
    let submit: serde_json::Value = client
        .post(format!("{base}/api/v1/jobs"))
        .json(&request)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = submit["id"].as_u64().unwrap();
    let summary = wait_done(&client, &base, id).await;
    assert_eq!(summary["status"], "finished", "{summary}");
    assert_eq!(summary["result"]["all_passed"], true);

    let artifacts: serde_json::Value = client
        .get(format!("{base}/api/v1/jobs/{id}/artifacts"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let files: Vec<String> = artifacts["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect();
    assert!(files.contains(&"check_report.json".to_string()), "{files:?}");
    drop(dir);
}

#[tokio::test]
async fn playback_eval_job_produces_report_and_telemetry() {
    let (base, dir) = start().await;
    let client = reqwest::Client::new();
    let mut cfg = RunConfig::desk();
    cfg.eval_cycles = 1;
    cfg.randomization = exosquat_core::config::RandomizationPreset::Off;
    cfg.env.reset_noise = 0.0;
    let request = JobRequest {
        kind: JobKind::Eval,
        config: cfg,
        controller: ControllerSpec::Playback,
        out_dir: None,
        label: "eval-test".into(),
    };
    let submit: serde_json::Value = client
        .post(format!("{base}/api/v1/jobs"))
        .json(&request)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let id = submit["id"].as_u64().unwrap();
    let summary = wait_done(&client, &base, id).await;
    assert_eq!(summary["status"], "finished", "{summary}");
    let report = &summary["result"]["report"];
    assert_eq!(report["cycles_completed"], 1);
    assert!(report["cop_in_region_both"].as_f64().unwrap() > 0.9);

    let artifacts: serde_json::Value = client
        .get(format!("{base}/api/v1/jobs/{id}/artifacts"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let files: Vec<String> = artifacts["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap().to_string())
        .collect();
    for expected in ["telemetry.csv", "cop.csv", "report.json", "plots/cop_traces.csv"] {
        assert!(files.contains(&expected.to_string()), "missing {expected} in {files:?}");
    }
    drop(dir);
}

#[tokio::test]
async fn unknown_job_is_404_and_invalid_config_is_400() {
    let (base, _dir) = start().await;
    let client = reqwest::Client::new();
    let missing = client.get(format!("{base}/api/v1/jobs/999")).send().await.unwrap();
    assert_eq!(missing.status(), 404);

    let mut cfg = RunConfig::case2();
    cfg.mode = exosquat_core::env::Mode::Clean;
    let request = JobRequest {
        kind: JobKind::Eval,
        config: cfg,
        controller: ControllerSpec::Playback,
        out_dir: None,
        label: String::new(),
    };
    let bad = client.post(format!("{base}/api/v1/jobs")).json(&request).send().await.unwrap();
    assert_eq!(bad.status(), 400);
}
