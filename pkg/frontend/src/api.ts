/** Typed client for the alignment service. The UI never computes transforms
 * or metrics locally; everything numeric comes from these endpoints. */

import type { GridGeometry, JobState, RegistrationRequest } from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function expectOk(resp: Response): Promise<Response> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ServiceError(resp.status, detail);
  }
  return resp;
}

export class AlignmentClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(form: FormData): Promise<string> {
    const resp = await expectOk(
      await this.fetchImpl(this.url("/sessions"), { method: "POST", body: form }),
    );
    const body = (await resp.json()) as { session_id: string };
    return body.session_id;
  }

  async putAoi(sessionId: string, which: "ref" | "target", text: string): Promise<void> {
    await expectOk(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/aoi/${which}`), {
        method: "PUT",
        body: text,
        headers: { "content-type": "text/plain" },
      }),
    );
  }

  async getAoi(sessionId: string, which: "ref" | "target"): Promise<string> {
    const resp = await expectOk(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/aoi/${which}`)),
    );
    return resp.text();
  }

  async putMask(sessionId: string, text: string): Promise<void> {
    await expectOk(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/mask`), {
        method: "PUT",
        body: text,
        headers: { "content-type": "text/plain" },
      }),
    );
  }

  async getMask(sessionId: string): Promise<string> {
    const resp = await expectOk(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/mask`)),
    );
    return resp.text();
  }

  async register(sessionId: string, config: RegistrationRequest): Promise<string> {
    const resp = await expectOk(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/register`), {
        method: "POST",
        body: JSON.stringify(config),
        headers: { "content-type": "application/json" },
      }),
    );
    const body = (await resp.json()) as { job_id: string };
    return body.job_id;
  }

  async jobStatus(jobId: string): Promise<JobState> {
    const resp = await expectOk(await this.fetchImpl(this.url(`/jobs/${jobId}`)));
    return (await resp.json()) as JobState;
  }

  /** Poll until the job leaves the queue; resolves with the final state. */
  async waitForJob(
    jobId: string,
    opts: { intervalMs?: number; timeoutMs?: number } = {},
  ): Promise<JobState> {
    const interval = opts.intervalMs ?? 250;
    const deadline = Date.now() + (opts.timeoutMs ?? 300_000);
    for (;;) {
      const state = await this.jobStatus(jobId);
      if (state.status === "done" || state.status === "error") return state;
      if (Date.now() > deadline) throw new ServiceError(408, "job polling timed out");
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }

  async artifactText(sessionId: string, kind: string): Promise<string> {
    const resp = await expectOk(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/artifacts/${kind}`)),
    );
    return resp.text();
  }

  artifactUrl(sessionId: string, kind: string): string {
    return this.url(`/sessions/${sessionId}/artifacts/${kind}`);
  }

  renderUrl(sessionId: string, which: "reference" | "target" | "aligned"): string {
    return this.url(`/sessions/${sessionId}/render/${which}`);
  }

  async geometry(sessionId: string, which: "reference" | "target"): Promise<GridGeometry> {
    const resp = await expectOk(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/geometry/${which}`)),
    );
    return (await resp.json()) as GridGeometry;
  }
}
