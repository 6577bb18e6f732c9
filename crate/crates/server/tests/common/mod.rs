#![allow(dead_code)]

use teval_client::Client;
use teval_core::admin::ParameterUpdate;
use teval_core::auth::PasswordHash;
use teval_core::TeacherId;
use teval_server::{build_state, serve, AppState, ServerConfig};

pub const PASSWORD: &str = "parola-test";
pub const TEACHER: &str = "luca";

pub fn config() -> ServerConfig {
    ServerConfig {
        admin_pass_hash: Some(PasswordHash::with_salt(PASSWORD, [7; 16], 2)),
        trust_proxy_header: true,
        ..ServerConfig::default()
    }
}

pub struct Running {
    pub url: String,
    pub state: AppState,
    task: tokio::task::JoinHandle<()>,
}

impl Running {
    pub fn client(&self) -> Client {
        Client::new(&self.url)
    }

    pub fn student(&self, ip: &str) -> Client {
        Client::new(&self.url).with_forwarded_for(ip)
    }

    pub async fn admin(&self) -> Client {
        let mut c = self.client();
        c.login("admin", PASSWORD).await.unwrap();
        c
    }

    pub fn stop(self) {
        self.task.abort();
    }
}

pub async fn start(config: ServerConfig) -> Running {
    let state = build_state(&config).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let task = tokio::spawn({
        let state = state.clone();
        async move {
            serve(listener, state).await.unwrap();
        }
    });
    Running { url, state, task }
}

/// Adds the default teacher and activates the campaign with `official` on the
/// allowlist.
pub async fn activate(server: &Running, official: &[&str]) -> Client {
    let admin = server.admin().await;
    admin.upsert_teacher(Some(TEACHER), "Conf. dr. Lucian Luca").await.unwrap();
    admin
        .set_config(&ParameterUpdate {
            active: Some(true),
            current_teacher: Some(TeacherId::new(TEACHER).unwrap()),
            allowlist: Some(official.iter().map(|s| s.to_string()).collect()),
            deadline_seconds: None,
        })
        .await
        .unwrap();
    admin
}
