/**
 * Speech synthesis and recognition boundaries.
 *
 * The app code depends only on SynthSink and RecognitionPort; the browser
 * adapters at the bottom are the one place the Web Speech API is touched,
 * and both degrade to null rather than throwing when the API is missing.
 */

import type { SpeakPayload } from "./types.js";

export interface UtterancePlan {
  text: string;
  rate: number;
  pitch: number;
  volume: number;
  voice: string;
}

export interface SynthSink {
  /** Resolves when the utterance has finished (or failed) speaking. */
  speak(plan: UtterancePlan): Promise<void>;
}

export function planFromSpeak(payload: SpeakPayload): UtterancePlan {
  return {
    text: payload.text,
    rate: payload.rate,
    pitch: payload.pitch,
    volume: payload.volume,
    voice: payload.voice,
  };
}

/**
 * Serializes synthesis: one utterance at a time, in enqueue order, even when
 * callers do not await. Errors are swallowed per-utterance so one failed
 * speak cannot wedge the queue.
 */
export class SpeechQueue {
  private chain: Promise<void> = Promise.resolve();

  constructor(private readonly sink: SynthSink) {}

  enqueue(plan: UtterancePlan): Promise<void> {
    this.chain = this.chain.then(() =>
      this.sink.speak(plan).catch(() => undefined),
    );
    return this.chain;
  }
}

export interface RecognitionHandle {
  stop(): void;
}

export interface RecognitionPort {
  /**
   * Start listening. onFinal fires at most once with the final transcript;
   * interim results are not surfaced (captions show final text only).
   */
  start(
    onFinal: (text: string) => void,
    onError: (err: unknown) => void,
  ): RecognitionHandle;
}

type SpeechRecognitionCtor = new () => {
  continuous: boolean;
  interimResults: boolean;
  maxAlternatives: number;
  onresult: ((ev: { results: ArrayLike<ArrayLike<{ transcript: string }>> }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  start(): void;
  stop(): void;
};

/** Browser recognition adapter; null when the API is unavailable. */
export function webSpeechRecognition(): RecognitionPort | null {
  const g = globalThis as {
    SpeechRecognition?: SpeechRecognitionCtor;
    webkitSpeechRecognition?: SpeechRecognitionCtor;
  };
  const Ctor = g.SpeechRecognition ?? g.webkitSpeechRecognition;
  if (!Ctor) return null;
  return {
    start(onFinal, onError) {
      const rec = new Ctor();
      rec.continuous = false;
      rec.interimResults = false;
      rec.maxAlternatives = 1;
      rec.onresult = (ev) => {
        const last = ev.results[ev.results.length - 1];
        const alt = last ? last[0] : undefined;
        if (alt) onFinal(alt.transcript);
      };
      rec.onerror = (ev) => onError(ev);
      try {
        rec.start();
      } catch (err) {
        onError(err);
      }
      return {
        stop() {
          try {
            rec.stop();
          } catch {
            // Stopping twice is harmless.
          }
        },
      };
    },
  };
}

/** Browser synthesis adapter; null when speechSynthesis is unavailable. */
export function webSpeechSink(): SynthSink | null {
  const g = globalThis as {
    speechSynthesis?: SpeechSynthesis;
    SpeechSynthesisUtterance?: new (text: string) => SpeechSynthesisUtterance;
  };
  const synth = g.speechSynthesis;
  const Utterance = g.SpeechSynthesisUtterance;
  if (!synth || !Utterance) return null;
  return {
    speak(plan: UtterancePlan): Promise<void> {
      return new Promise((resolve) => {
        const u = new Utterance(plan.text);
        u.rate = plan.rate;
        u.pitch = plan.pitch;
        u.volume = plan.volume;
        const match = synth
          .getVoices()
          .find((v) => v.name === plan.voice);
        if (match) u.voice = match;
        u.onend = () => resolve();
        u.onerror = () => resolve();
        synth.speak(u);
      });
    },
  };
}
