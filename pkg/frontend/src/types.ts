/**
 * Wire types mirrored from the engine's HTTP and WebSocket contract.
 *
 * These are hand-maintained rather than generated; the service is small and
 * the shapes change rarely. Field names match the JSON exactly, including the
 * snake_case ones, so responses can be used without a mapping layer.
 */

export type Profile = "Blind" | "LowVision" | "Sighted";

export type DetailLevel = "Minimal" | "Balanced" | "Expansive";

export interface PlayerSettings {
  audioDescriptionEnabled: boolean;
  audioDescriptionPlacement: string;
  audioDescriptionVolume: number;
  audioDescriptionVoiceSelection: string;
  audioDescriptionSpeechRate: number;
  audioDescriptionPitch: number;
  audioDescriptionDetails: DetailLevel;
  playbackRate: number;
  videoPlayerVolume: number;
  fontMagnification: number;
  darkMode: boolean;
  userInquiryDetails: DetailLevel;
  userDescription: string;
}

/** Payload of a "speak" event. The prosody fields are already resolved. */
export interface SpeakPayload {
  text: string;
  rate: number;
  pitch: number;
  volume: number;
  voice: string;
  timestamp_s?: number;
  source?: string;
}

export type EventKind =
  | "speak"
  | "pause"
  | "resume"
  | "earcon"
  | "settings_changed"
  | "action_resolution"
  | "error";

export interface SessionEvent {
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface PlayerStateSnapshot {
  position_s: number;
  playing: boolean;
}

export interface RewriteInfo {
  rephrased: string;
  edited: string;
  relevantTimestamps: number[];
}

export interface ResolvedAction {
  type: string;
  newTimestamp: number;
  resolution: string;
}

/** Response of POST /sessions/{id}/query. */
export interface QueryResponse {
  speak: string;
  caption: string;
  intent: string;
  rewrite: RewriteInfo;
  action: ResolvedAction | null;
  events: SessionEvent[];
  state: PlayerStateSnapshot;
}

export interface DescriptionCue {
  timestamp: number;
  text: string;
}
