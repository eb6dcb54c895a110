/**
 * Earcons: three short, distinct audio cues.
 *
 * mic-on is an ascending pair, mic-off the same pair descending, and
 * thinking is a soft double tick that the app repeats while waiting. They
 * are defined as tone sequences so tests can assert the shapes without an
 * audio stack; a freqHz of 0 is a rest.
 */

export type EarconName = "mic_on" | "mic_off" | "thinking" | "cancelled";

export interface ToneStep {
  freqHz: number;
  ms: number;
}

export const EARCON_TONES: Record<EarconName, ToneStep[]> = {
  mic_on: [
    { freqHz: 523, ms: 70 },
    { freqHz: 784, ms: 90 },
  ],
  mic_off: [
    { freqHz: 784, ms: 70 },
    { freqHz: 523, ms: 90 },
  ],
  thinking: [
    { freqHz: 440, ms: 40 },
    { freqHz: 0, ms: 160 },
    { freqHz: 440, ms: 40 },
  ],
  cancelled: [{ freqHz: 330, ms: 120 }],
};

export interface EarconPlayer {
  play(name: EarconName): void;
}

/** Minimal synthesis boundary so the player stays testable off-browser. */
export interface ToneSink {
  tone(freqHz: number, ms: number): void;
}

export class ToneEarconPlayer implements EarconPlayer {
  constructor(private readonly sink: ToneSink) {}

  play(name: EarconName): void {
    for (const step of EARCON_TONES[name]) {
      this.sink.tone(step.freqHz, step.ms);
    }
  }
}

/**
 * WebAudio-backed sink. Built lazily because AudioContext must be created
 * after a user gesture in most browsers.
 */
export function webAudioSink(): ToneSink | null {
  const Ctx = (globalThis as { AudioContext?: new () => AudioContext })
    .AudioContext;
  if (!Ctx) return null;
  let ctx: AudioContext | null = null;
  let cursor = 0;
  return {
    tone(freqHz: number, ms: number): void {
      try {
        ctx = ctx ?? new Ctx();
        const now = Math.max(ctx.currentTime, cursor);
        cursor = now + ms / 1000;
        if (freqHz <= 0) return; // rest
        const osc = ctx.createOscillator();
        const gain = ctx.createGain();
        osc.frequency.value = freqHz;
        gain.gain.value = 0.2;
        osc.connect(gain).connect(ctx.destination);
        osc.start(now);
        osc.stop(cursor);
      } catch {
        // Audio being unavailable should never break the UI.
      }
    },
  };
}
