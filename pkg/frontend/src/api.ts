/**
 * HTTP and WebSocket client for the engine service.
 *
 * fetch and the WebSocket constructor are injected so tests run with plain
 * fakes and the browser build passes the globals through unchanged.
 */

import type {
  DescriptionCue,
  PlayerSettings,
  Profile,
  QueryResponse,
  SessionEvent,
} from "./types.js";

export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  },
) => Promise<ResponseLike>;

export interface SocketLike {
  addEventListener(type: "message", fn: (ev: { data: string }) => void): void;
  addEventListener(type: "close", fn: () => void): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function parseOrThrow<T>(res: ResponseLike, what: string): Promise<T> {
  if (!res.ok) {
    throw new ApiError(res.status, `${what} failed with status ${res.status}`);
  }
  return (await res.json()) as T;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
    private readonly socketFactory: SocketFactory,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private post(path: string, body: unknown, method = "POST"): Promise<ResponseLike> {
    return this.fetchImpl(this.url(path), {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async createSession(videoId: string, profile: Profile): Promise<string> {
    const res = await this.post("/sessions", { video_id: videoId, profile });
    const data = await parseOrThrow<{ session_id: string }>(res, "create session");
    return data.session_id;
  }

  async postQuery(
    sessionId: string,
    utterance: string,
    positionS?: number,
  ): Promise<QueryResponse> {
    const body: Record<string, unknown> = { utterance };
    if (positionS !== undefined) body["position_s"] = positionS;
    const res = await this.post(`/sessions/${sessionId}/query`, body);
    return parseOrThrow<QueryResponse>(res, "query");
  }

  async getSettings(sessionId: string): Promise<PlayerSettings> {
    const res = await this.fetchImpl(this.url(`/sessions/${sessionId}/settings`));
    return parseOrThrow<PlayerSettings>(res, "get settings");
  }

  async patchSettings(
    sessionId: string,
    delta: Partial<PlayerSettings>,
  ): Promise<PlayerSettings> {
    const res = await this.post(`/sessions/${sessionId}/settings`, delta, "PATCH");
    return parseOrThrow<PlayerSettings>(res, "patch settings");
  }

  async getDescriptions(videoId: string, tier: string): Promise<DescriptionCue[]> {
    const res = await this.fetchImpl(
      this.url(`/videos/${encodeURIComponent(videoId)}/descriptions?tier=${tier}`),
    );
    return parseOrThrow<DescriptionCue[]>(res, "get descriptions");
  }

  /** Open the live event stream; see EventStream for reconnect behavior. */
  openEvents(
    sessionId: string,
    onEvent: (event: SessionEvent) => void,
  ): EventStream {
    const ws = this.url(`/sessions/${sessionId}/events`).replace(/^http/, "ws");
    return new EventStream(ws, this.socketFactory, onEvent);
  }
}

/**
 * Event stream with resume-on-disconnect. Each connection carries a
 * resume_from marker of how many events this client has already handled;
 * the current service starts every connection from its live queue and
 * ignores the marker, but sending it keeps reconnects honest once the
 * service learns to replay. Manual close() suppresses reconnecting.
 */
export class EventStream {
  received = 0;
  private socket: SocketLike | null = null;
  private closed = false;

  constructor(
    private readonly wsUrl: string,
    private readonly factory: SocketFactory,
    private readonly onEvent: (event: SessionEvent) => void,
  ) {
    this.connect();
  }

  private connect(): void {
    const socket = this.factory(`${this.wsUrl}?resume_from=${this.received}`);
    this.socket = socket;
    socket.addEventListener("message", (ev) => {
      let parsed: SessionEvent;
      try {
        parsed = JSON.parse(ev.data) as SessionEvent;
      } catch {
        return; // skip malformed frames rather than killing the stream
      }
      this.received += 1;
      this.onEvent(parsed);
    });
    socket.addEventListener("close", () => {
      if (!this.closed) this.connect();
    });
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
