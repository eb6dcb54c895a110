/**
 * Sequential consumer for session events.
 *
 * Events arrive as [pause, speak, resume] style runs from both the query
 * response and the WebSocket stream. Dispatch is chained on a single
 * promise, so a speak's synthesis fully completes before the following
 * resume starts the media again; no event is handled out of order.
 */

import { CaptionModel } from "./captions.js";
import type { EarconName, EarconPlayer } from "./earcons.js";
import { applyActionResolution, applyPlaybackSettings, MediaLike } from "./player.js";
import { planFromSpeak, SpeechQueue } from "./speech.js";
import type { PlayerSettings, SessionEvent, SpeakPayload } from "./types.js";

export interface EventPumpDeps {
  media: MediaLike;
  speech: SpeechQueue;
  earcons: EarconPlayer;
  captions: CaptionModel;
  /** Called when settings actually change (idempotent repeats are dropped). */
  onSettings?: (settings: PlayerSettings) => void;
  onError?: (message: string) => void;
}

export class EventPump {
  private chain: Promise<void> = Promise.resolve();
  private lastSettingsJson: string | null = null;

  constructor(private readonly deps: EventPumpDeps) {}

  /** Queue one event. Returns a promise for when it has been handled. */
  consume(event: SessionEvent): Promise<void> {
    this.chain = this.chain.then(() => this.dispatch(event));
    return this.chain;
  }

  async consumeAll(events: SessionEvent[]): Promise<void> {
    let last: Promise<void> = this.chain;
    for (const event of events) {
      last = this.consume(event);
    }
    await last;
  }

  private async dispatch(event: SessionEvent): Promise<void> {
    const payload = event.payload ?? {};
    switch (event.kind) {
      case "pause":
        this.deps.media.pause();
        return;
      case "speak": {
        const speak = payload as unknown as SpeakPayload;
        this.deps.captions.appendAgent(speak.text ?? "");
        // Await so a following resume stays behind synthesis end.
        await this.deps.speech.enqueue(planFromSpeak(speak));
        return;
      }
      case "resume":
        await this.deps.media.play();
        return;
      case "earcon": {
        const name = payload["name"];
        if (typeof name === "string") {
          this.deps.earcons.play(name as EarconName);
        }
        return;
      }
      case "settings_changed": {
        const settings = payload["settings"] as PlayerSettings | undefined;
        if (!settings) return;
        const encoded = JSON.stringify(settings);
        if (encoded === this.lastSettingsJson) return; // no re-render churn
        this.lastSettingsJson = encoded;
        this.deps.captions.applySettings(settings);
        applyPlaybackSettings(this.deps.media, settings);
        this.deps.onSettings?.(settings);
        return;
      }
      case "action_resolution":
        applyActionResolution(this.deps.media, payload);
        return;
      case "error": {
        const message = payload["message"];
        this.deps.onError?.(typeof message === "string" ? message : "unknown error");
        return;
      }
    }
  }
}
