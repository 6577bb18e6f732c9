use std::io::{self, BufRead, Write};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use teval_client::Client;
use teval_core::admin::ParameterUpdate;
use teval_core::model::{AnswerValue, TeacherId};
use teval_core::results::write_table;
use teval_core::wire::{SessionResponse, SessionState};

#[derive(Parser)]
#[command(name = "teval", version, about = "Command-line client for the teaching-evaluation service")]
struct Cli {
    #[arg(long, env = "TEVAL_URL", default_value = "http://127.0.0.1:8080", global = true)]
    url: String,
    /// Present as this address (needs a server started with --trust-proxy-header).
    #[arg(long, env = "TEVAL_AS_IP", global = true)]
    as_ip: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Login {
    #[arg(long, env = "TEVAL_ADMIN_USER", default_value = "admin")]
    user: String,
    #[arg(long, env = "TEVAL_ADMIN_PASSWORD")]
    password: String,
}

#[derive(Subcommand)]
enum Command {
    /// Show the current question (opens a session if needed).
    Session,
    /// Answer one question.
    Answer {
        index: u32,
        /// 1..=5. Omit to submit without a selection.
        value: Option<i64>,
    },
    /// Delete this address's demo answers.
    Reset,
    /// Answer the questionnaire interactively on stdin.
    Walk,
    /// Campaign status.
    Status {
        #[command(flatten)]
        login: Login,
    },
    /// Show or change campaign parameters.
    Config {
        #[command(flatten)]
        login: Login,
        #[arg(long)]
        active: Option<bool>,
        #[arg(long)]
        teacher: Option<String>,
        /// Comma-separated addresses; an empty value clears the list.
        #[arg(long)]
        allowlist: Option<String>,
        #[arg(long, conflicts_with = "clear_deadline")]
        deadline_seconds: Option<u64>,
        #[arg(long)]
        clear_deadline: bool,
    },
    /// Manage evaluated teachers.
    Teachers {
        #[command(flatten)]
        login: Login,
        #[command(subcommand)]
        action: TeacherAction,
    },
    /// Re-read the question bank file on the server.
    ReloadBank {
        #[command(flatten)]
        login: Login,
    },
    /// Run the server's integrity scan.
    Integrity {
        #[command(flatten)]
        login: Login,
    },
    /// List completed questionnaires.
    Results {
        #[command(flatten)]
        login: Login,
        #[arg(long)]
        teacher: Option<String>,
        #[arg(long)]
        include_demo: bool,
        /// Write CSV to stdout.
        #[arg(long)]
        csv: bool,
        /// With --csv, emit scored rather than raw values.
        #[arg(long)]
        scored: bool,
    },
    /// Print the HTML report of one questionnaire.
    Print {
        #[command(flatten)]
        login: Login,
        questionnaire_no: u64,
    },
}

#[derive(Subcommand)]
enum TeacherAction {
    List {
        #[arg(long)]
        include_hidden: bool,
    },
    Add {
        display_name: String,
        #[arg(long)]
        id: Option<String>,
    },
    Remove {
        id: String,
    },
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut client = Client::new(&cli.url);
    if let Some(ip) = &cli.as_ip {
        client = client.with_forwarded_for(ip);
    }
    match cli.command {
        Command::Session => show(&client.session().await?),
        Command::Answer { index, value } => show(&client.answer(index, value).await?),
        Command::Reset => {
            let r = client.reset().await?;
            println!("deleted {} answers ({:?})", r.deleted_answers, r.mode);
        }
        Command::Walk => walk(&client).await?,
        Command::Status { login } => {
            let c = logged_in(client, &login).await?;
            print_json(&c.status().await?)?;
        }
        Command::Config { login, active, teacher, allowlist, deadline_seconds, clear_deadline } => {
            let c = logged_in(client, &login).await?;
            let update = ParameterUpdate {
                active,
                current_teacher: teacher.map(TeacherId::new).transpose().context("invalid teacher id")?,
                allowlist: allowlist
                    .map(|l| l.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()),
                deadline_seconds: if clear_deadline { Some(None) } else { deadline_seconds.map(Some) },
            };
            let config =
                if update == ParameterUpdate::default() { c.config().await? } else { c.set_config(&update).await? };
            print_json(&config)?;
        }
        Command::Teachers { login, action } => {
            let c = logged_in(client, &login).await?;
            match action {
                TeacherAction::List { include_hidden } => {
                    for t in c.teachers(include_hidden).await? {
                        let hidden = if t.hidden { " (hidden)" } else { "" };
                        println!("{}\t{}{hidden}", t.teacher.id, t.teacher.display_name);
                    }
                }
                TeacherAction::Add { display_name, id } => {
                    let t = c.upsert_teacher(id.as_deref(), &display_name).await?;
                    println!("{}\t{}", t.id, t.display_name);
                }
                TeacherAction::Remove { id } => c.remove_teacher(&id).await?,
            }
        }
        Command::ReloadBank { login } => {
            let c = logged_in(client, &login).await?;
            println!("loaded {} items", c.reload_bank().await?.items);
        }
        Command::Integrity { login } => {
            let c = logged_in(client, &login).await?;
            let report = c.integrity().await?;
            print_json(&report)?;
            if !report.is_ok() {
                std::process::exit(1);
            }
        }
        Command::Results { login, teacher, include_demo, csv, scored } => {
            let c = logged_in(client, &login).await?;
            let rows = c.results(teacher.as_deref(), include_demo).await?;
            if csv {
                write_table(&rows, scored, io::stdout().lock())?;
            } else {
                for r in &rows {
                    let demo = if r.demo { " DEMO" } else { "" };
                    println!(
                        "{}\t{}\t{}{demo}",
                        r.questionnaire_no,
                        r.completed_at.format("%Y-%m-%d %H:%M"),
                        r.teacher_display_name
                    );
                }
            }
        }
        Command::Print { login, questionnaire_no } => {
            let c = logged_in(client, &login).await?;
            print!("{}", c.print(questionnaire_no).await?);
        }
    }
    Ok(())
}

async fn logged_in(mut client: Client, login: &Login) -> anyhow::Result<Client> {
    client.login(&login.user, &login.password).await.context("login failed")?;
    Ok(client)
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn show(resp: &SessionResponse) {
    match resp.state {
        SessionState::Question => {
            if let Some(q) = &resp.question {
                println!(
                    "[{:?}] {}  ({}/{})",
                    resp.mode, q.teacher_display_name, q.progress.answered, q.progress.total
                );
                if let Some(msg) = &q.status_message {
                    println!("{msg}");
                }
                println!("{}. {}", q.question.index, q.question.text);
            }
        }
        SessionState::Completed => {
            if let Some(n) = &resp.completed {
                match n.questionnaire_no {
                    Some(no) => println!("Completed: questionnaire {no} for {}", n.teacher_display_name),
                    None => println!("Completed for {}", n.teacher_display_name),
                }
            }
        }
        SessionState::Closed => {
            if let Some(n) = &resp.closed {
                println!("{}", n.message);
            }
        }
    }
}

async fn walk(client: &Client) -> anyhow::Result<()> {
    let mut resp = client.session().await?;
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        show(&resp);
        let Some(q) = resp.question.as_ref().filter(|_| resp.state == SessionState::Question) else {
            return Ok(());
        };
        for v in AnswerValue::all() {
            println!("  {v}");
        }
        print!("> ");
        io::stdout().flush()?;
        let Some(line) = lines.next().transpose()? else {
            bail!("input closed before the questionnaire was finished");
        };
        let value = line.trim().parse().ok();
        resp = match client.answer(q.question.index, value).await {
            Ok(next) => next,
            Err(e) => match e.api_body() {
                Some(body) => {
                    println!("{}", body.message);
                    client.session().await?
                }
                None => return Err(e.into()),
            },
        };
    }
}
