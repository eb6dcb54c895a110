import type { PlayerSettings } from "./types.js";

export type Speaker = "user" | "agent";

export interface CaptionLine {
  speaker: Speaker;
  text: string;
}

/**
 * Ordered caption history plus the current display scale.
 *
 * Invariant: no caption content originates here. Every line is appended for
 * exactly one stream event (agent) or one submitted utterance (user), and
 * these two methods are the only way lines get in.
 */
export class CaptionModel {
  readonly lines: CaptionLine[] = [];
  private scale = 1.0;

  appendAgent(text: string): void {
    // A cancelled turn produces an empty speak; it gets no caption line.
    if (!text.trim()) return;
    this.lines.push({ speaker: "agent", text });
  }

  appendUser(text: string): void {
    if (!text.trim()) return;
    this.lines.push({ speaker: "user", text });
  }

  /** Mirror fontMagnification into the caption scale. */
  applySettings(settings: Pick<PlayerSettings, "fontMagnification">): void {
    this.scale = settings.fontMagnification;
  }

  get captionScale(): number {
    return this.scale;
  }
}
