/** Spawns the primary stack (`rentchain serve`) for end-to-end tests. */

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface RunningGateway {
  baseUrl: string;
  stop: () => void;
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address && typeof address === "object") {
        const port = address.port;
        server.close(() => resolve(port));
      } else {
        reject(new Error("no port assigned"));
      }
    });
  });
}

async function waitReady(baseUrl: string, child: ChildProcess, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (child.exitCode !== null) {
      throw new Error(`gateway exited early with code ${child.exitCode}`);
    }
    try {
      const response = await fetch(`${baseUrl}/auth/token`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ user_id: "readiness-probe" }),
      });
      if (response.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("gateway did not become ready in time");
}

export async function startGateway(): Promise<RunningGateway> {
  const dir = mkdtempSync(join(tmpdir(), "rentchain-e2e-"));
  const port = await freePort();
  const configPath = join(dir, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      data_dir: join(dir, "data"),
      port,
      latency_range: [1.0, 3.0],
      token_ttl_seconds: 7 * 365 * 86400,
    }),
  );
  const child = spawn("rentchain", ["serve", "--config", configPath], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  child.stderr?.on("data", () => {});
  child.stdout?.on("data", () => {});
  const baseUrl = `http://127.0.0.1:${port}`;
  await waitReady(baseUrl, child);
  return {
    baseUrl,
    stop: () => {
      child.kill("SIGTERM");
    },
  };
}
