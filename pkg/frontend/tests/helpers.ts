// Spawns a real grading service on a fresh workspace seeded with the bundled
// fixture corpus, so the UI tests drive the same API the browser sees.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export const ASSIGNMENT_ID = "solubility-exam-1";
export const APPROVALS: Record<string, number> = { p1: 0, p2: 0, p3: 1, p4: 0 };
export const P1_INSTRUCTION =
  "Mentioning either charge separation or unequal sharing of electrons counts as correct.";

export interface TestService {
  baseUrl: string;
  workspace: string;
  stop(): void;
}

function cli(workspace: string, ...argv: string[]): void {
  execFileSync("qagrader", ["--workspace", workspace, ...argv], { stdio: "pipe" });
}

export function fixtureDir(): string {
  return execFileSync(
    "python3",
    ["-c", "import qagrader.fixture as f; print(f.ASSIGNMENT.parent)"],
    { encoding: "utf-8" },
  ).trim();
}

export function seedWorkspace(workspace: string): void {
  const fx = fixtureDir();
  cli(
    workspace,
    "ingest",
    "--assignment", join(fx, "assignment.json"),
    "--responses", join(fx, "responses.jsonl"),
    "--labels", join(fx, "labels.jsonl"),
    "--labels", join(fx, "grader_a.jsonl"),
    "--labels", join(fx, "grader_b.jsonl"),
    "--feedback", join(fx, "feedback.json"),
  );
  cli(
    workspace,
    "gen-questions",
    "--assignment", ASSIGNMENT_ID,
    "--backend", "scripted",
    "--script", join(fx, "questions.json"),
  );
  cli(workspace, "reconcile", "--a", "grader_a", "--b", "grader_b");
}

async function waitForReady(baseUrl: string, child: ChildProcess, timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    if (child.exitCode !== null) {
      throw new Error(`service exited early with code ${child.exitCode}`);
    }
    try {
      const response = await fetch(`${baseUrl}/assignments`);
      if (response.ok) return;
    } catch (error) {
      lastError = error;
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error(`service never became ready: ${String(lastError)}`);
}

export async function startService(): Promise<TestService> {
  const workspace = mkdtempSync(join(tmpdir(), "qagrader-ui-"));
  seedWorkspace(workspace);

  const port = 21000 + Math.floor(Math.random() * 20000);
  const baseUrl = `http://127.0.0.1:${port}`;
  const child = spawn(
    "qagrader",
    ["--workspace", workspace, "serve", "--port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  child.stderr?.on("data", () => undefined); // keep the pipe drained

  await waitForReady(baseUrl, child);
  return {
    baseUrl,
    workspace,
    stop() {
      child.kill("SIGTERM");
      rmSync(workspace, { recursive: true, force: true });
    },
  };
}
