// Plain oscillator voices through the Web Audio graph. Fidelity is not
// the point; start/stop times are.

import { NoteEvent } from './protocol.js';
import { NotePlayer } from './scheduler.js';

export interface OscillatorLike {
	type: string;
	frequency: { value: number };
	connect(node: unknown): void;
	start(when: number): void;
	stop(when: number): void;
}

export interface GainLike {
	gain: { value: number };
	connect(node: unknown): void;
}

export interface AudioContextLike {
	currentTime: number;
	destination: unknown;
	createOscillator(): OscillatorLike;
	createGain(): GainLike;
}

export function midiToHz(pitch: number): number {
	return 440 * Math.pow(2, (pitch - 69) / 12);
}

export class OscillatorPlayer implements NotePlayer {
	constructor(private readonly ctx: AudioContextLike, private readonly volume = 0.12) {}

	play(note: NoteEvent, whenSeconds: number, secondsPerBeat: number): void {
		const osc = this.ctx.createOscillator();
		const gain = this.ctx.createGain();
		osc.type = note.track === 'melody' ? 'triangle' : 'sine';
		osc.frequency.value = midiToHz(note.pitch);
		gain.gain.value = this.volume * (note.velocity / 127);
		osc.connect(gain);
		gain.connect(this.ctx.destination);
		osc.start(whenSeconds);
		osc.stop(whenSeconds + note.duration * secondsPerBeat);
	}
}
