// HTTP client for the annotation service. Every mask pixel shown in the UI
// comes back from these calls; the client never edits masks locally.

export interface CandidateRef {
  index: number;
  label: string;
  url: string;
}

export interface MgacResponse {
  candidates: CandidateRef[];
  diagnostic_url: string;
}

export interface Stroke {
  points: [number, number][]; // [x, y] pixel coordinates
  radius: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectOk(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && body.detail) detail = String(body.detail);
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response;
}

export class ApiClient {
  constructor(private base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async createSession(imageBytes: ArrayBuffer | Uint8Array): Promise<string> {
    const body =
      imageBytes instanceof Uint8Array
        ? new Uint8Array(imageBytes).slice().buffer
        : imageBytes;
    const response = await expectOk(
      await fetch(this.url("/sessions"), {
        method: "POST",
        headers: { "Content-Type": "application/octet-stream" },
        body,
      })
    );
    const data = await response.json();
    return data.id as string;
  }

  imageUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/image`);
  }

  maskUrl(sessionId: string): string {
    return this.url(`/sessions/${sessionId}/mask`);
  }

  async fetchBytes(path: string): Promise<Uint8Array> {
    const response = await expectOk(await fetch(this.url(path)));
    return new Uint8Array(await response.arrayBuffer());
  }

  async runMgac(
    sessionId: string,
    seed: { cx: number; cy: number; a: number; b: number; rot?: number }
  ): Promise<MgacResponse> {
    const response = await expectOk(
      await fetch(this.url(`/sessions/${sessionId}/mgac`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(seed),
      })
    );
    return (await response.json()) as MgacResponse;
  }

  async selectCandidate(sessionId: string, index: number): Promise<void> {
    await expectOk(
      await fetch(this.url(`/sessions/${sessionId}/candidates/${index}/select`), {
        method: "POST",
      })
    );
  }

  async wand(sessionId: string, strokes: Stroke[], tolerance: number): Promise<void> {
    await expectOk(
      await fetch(this.url(`/sessions/${sessionId}/wand`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ strokes, tolerance }),
      })
    );
  }

  async undo(sessionId: string): Promise<void> {
    await expectOk(
      await fetch(this.url(`/sessions/${sessionId}/undo`), { method: "POST" })
    );
  }

  async save(sessionId: string, outPath: string): Promise<string> {
    const response = await expectOk(
      await fetch(this.url(`/sessions/${sessionId}/save`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ out_path: outPath }),
      })
    );
    const data = await response.json();
    return data.path as string;
  }
}
