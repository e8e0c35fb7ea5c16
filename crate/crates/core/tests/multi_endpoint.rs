use std::net::SocketAddr;

use photonic_hpc::client::{estimate_observable, ClientError, Observable, QpuClient, SplitPolicy};
use photonic_hpc::fock::{self, CircuitSpec, FockState, Histogram};
use photonic_hpc::service::{self, DeviceConfig};

fn spec(shots: u64) -> CircuitSpec {
    let angles = (0..14).map(|k| 0.3 + 0.1 * k as f64).collect();
    CircuitSpec::new(FockState::single_photons(8, &[0, 2, 4, 6]), vec![1, 1], angles, shots)
}

fn dead_url() -> String {
    let l = std::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    format!("http://{}", l.local_addr().unwrap())
}

#[tokio::test]
async fn equal_split_merges_seeded_shards() {
    let devs = service::spawn_local_devices(3, &DeviceConfig::instant("q")).await.unwrap();
    let client = QpuClient::from_urls(devs.iter().map(|d| d.url()));
    let s = spec(1000);
    let res = client.sample_multi(&s, &SplitPolicy::Equal, 40).await.unwrap();
    assert_eq!(res.total_shots, 1000);
    let shots: Vec<u64> = devs.iter().map(|d| res.per_endpoint_shots[&d.url()]).collect();
    assert_eq!(shots, [334, 333, 333]);

    let mut expected = Histogram::new();
    for (k, n) in shots.iter().enumerate() {
        expected.merge(&fock::sample(&s.with_shots(*n), 40 + k as u64).unwrap());
    }
    assert_eq!(res.histogram, expected);
}

#[tokio::test]
async fn weighted_and_all_to_one() {
    let devs = service::spawn_local_devices(2, &DeviceConfig::instant("q")).await.unwrap();
    let client = QpuClient::from_urls(devs.iter().map(|d| d.url()));
    let res = client.sample_multi(&spec(100), &SplitPolicy::Weighted(vec![3.0, 1.0]), 0).await.unwrap();
    assert_eq!(res.per_endpoint_shots[&devs[0].url()], 75);
    assert_eq!(res.per_endpoint_shots[&devs[1].url()], 25);
    let res = client.sample_multi(&spec(100), &SplitPolicy::AllToOne, 0).await.unwrap();
    assert_eq!(res.per_endpoint_shots.len(), 1);
}

#[tokio::test]
async fn failed_shard_retries_on_survivor() {
    let dev = service::spawn(DeviceConfig::instant("alive"), SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let dead = dead_url();
    let client = QpuClient::from_urls([dev.url(), dead.clone()]);
    let res = client.sample_multi(&spec(600), &SplitPolicy::Equal, 5).await.unwrap();
    assert_eq!(res.total_shots, 600);
    assert_eq!(res.per_endpoint_shots.get(&dead), None);
    assert_eq!(res.per_endpoint_shots[&dev.url()], 600);
    assert!(client.pool().up_indices() == [0]);
}

#[tokio::test]
async fn all_endpoints_down() {
    let client = QpuClient::from_urls([dead_url(), dead_url()]);
    let err = client.sample_multi(&spec(10), &SplitPolicy::Equal, 0).await.unwrap_err();
    assert!(matches!(err, ClientError::NoCapacity | ClientError::PartialFailure { .. }), "{err}");
    assert!(client.sample_multi(&spec(10), &SplitPolicy::Equal, 0).await.is_err());
}

#[tokio::test]
async fn rejected_shards_are_not_retried() {
    let devs = service::spawn_local_devices(2, &DeviceConfig::instant("q")).await.unwrap();
    let client = QpuClient::from_urls(devs.iter().map(|d| d.url()));
    let mut bad = spec(10);
    bad.bs_angles.push(0.0);
    let err = client.sample_multi(&bad, &SplitPolicy::Equal, 0).await.unwrap_err();
    match err {
        ClientError::PartialFailure { cause, .. } => assert_eq!(cause.reject_code(), Some("ANGLE_COUNT")),
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn observable_estimate_is_close_to_exact() {
    let devs = service::spawn_local_devices(2, &DeviceConfig::instant("q")).await.unwrap();
    let client = QpuClient::from_urls(devs.iter().map(|d| d.url()));
    let s = spec(20_000);
    let res = client.sample_multi(&s, &SplitPolicy::Equal, 9).await.unwrap();
    let (mean, se) = estimate_observable(&res, &Observable::ModePhotons(0)).unwrap();
    let exact = fock::mean_photon_numbers(&fock::exact_distribution(&s).unwrap())[0];
    assert!((mean - exact).abs() < 5.0 * se, "{mean} vs {exact} (se {se})");
}
