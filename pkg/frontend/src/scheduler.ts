// Gapless segment playback against the audio clock. Each received
// segment is scheduled to start exactly where the previous one ends; a
// frame that arrives after its slot has already begun raises the stall
// flag and restarts the chain slightly in the future.

import { NoteEvent, SegmentFrame } from './protocol.js';

export interface AudioClock {
	currentTime: number; // seconds, monotone
}

export interface NotePlayer {
	play(note: NoteEvent, whenSeconds: number, secondsPerBeat: number): void;
}

export interface SchedulerOptions {
	bpm?: number;
	beatsPerSegment?: number;
	startDelaySeconds?: number; // headroom before the very first segment
}

export interface ScheduledSegment {
	barIndex: number;
	startSeconds: number;
}

export class SegmentScheduler {
	readonly bpm: number;
	readonly beatsPerSegment: number;
	private readonly startDelay: number;
	private nextStart: number | null = null;
	stalled = false;
	readonly scheduled: ScheduledSegment[] = [];

	constructor(
		private readonly clock: AudioClock,
		private readonly player: NotePlayer,
		opts: SchedulerOptions = {},
	) {
		this.bpm = opts.bpm ?? 120;
		this.beatsPerSegment = opts.beatsPerSegment ?? 16;
		this.startDelay = opts.startDelaySeconds ?? 0.05;
	}

	get secondsPerBeat(): number {
		return 60 / this.bpm;
	}

	get segmentSeconds(): number {
		return this.beatsPerSegment * this.secondsPerBeat;
	}

	enqueue(frame: SegmentFrame): ScheduledSegment {
		const now = this.clock.currentTime;
		let start = this.nextStart ?? now + this.startDelay;
		if (start < now) {
			this.stalled = true; // underrun: the slot already began
			start = now + this.startDelay;
		}
		for (const note of frame.notes) {
			this.player.play(note, start + note.onset * this.secondsPerBeat, this.secondsPerBeat);
		}
		const entry = { barIndex: frame.bar_index, startSeconds: start };
		this.scheduled.push(entry);
		this.nextStart = start + this.segmentSeconds;
		return entry;
	}

	clearStall(): void {
		this.stalled = false;
	}

	reset(): void {
		this.nextStart = null;
		this.stalled = false;
		this.scheduled.length = 0;
	}
}
