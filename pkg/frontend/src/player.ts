import type { PlayerSettings } from "./types.js";

/**
 * Structural subset of HTMLMediaElement the UI actually touches. Tests use
 * plain fakes; in the browser a real <video> element satisfies it as-is.
 */
export interface MediaLike {
  paused: boolean;
  currentTime: number;
  playbackRate: number;
  volume: number;
  pause(): void;
  play(): void | Promise<void>;
}

export function applyPlaybackSettings(
  media: MediaLike,
  settings: Pick<PlayerSettings, "playbackRate" | "videoPlayerVolume">,
): void {
  media.playbackRate = settings.playbackRate;
  media.volume = settings.videoPlayerVolume;
}

/**
 * Apply an action_resolution event payload. The engine has already resolved
 * the action (clamping, restarts, overflow-to-pause), so the UI only
 * mirrors the outcome: seek to newTimestamp, then match the playing flag
 * the action implies. Plain navigation leaves the paused state alone.
 */
export function applyActionResolution(
  media: MediaLike,
  payload: Record<string, unknown>,
): void {
  const ts = payload["newTimestamp"];
  if (typeof ts === "number" && Number.isFinite(ts)) {
    media.currentTime = ts;
  }
  switch (payload["type"]) {
    case "PAUSE":
      media.pause();
      break;
    case "PLAY":
    case "RESTART":
      void media.play();
      break;
    default:
      break;
  }
}
