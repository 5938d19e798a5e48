// Wire protocol frames, mirrored field-for-field from the stream service.
// Every outbound frame passes through encodeClientFrame (which validates),
// and every inbound payload through parseServerFrame, so a malformed frame
// never propagates into the UI state.

export interface VAPoint {
	v: number;
	a: number;
}

export interface TargetFrame {
	type: 'target';
	v: number;
	a: number;
}

export interface SelectSongFrame {
	type: 'select_song';
	id?: string;
	midi_b64?: string;
}

export type FusionMethod = 'median' | 'concat' | 'features';
export type BackendName = 'rule' | 'neural';
export type Granularity = 'beat' | 'bar';

export interface SetConfigFrame {
	type: 'set_config';
	fusion?: FusionMethod;
	backend?: BackendName;
	granularity?: Granularity;
}

export type ClientFrame = TargetFrame | SelectSongFrame | SetConfigFrame;

export interface NoteEvent {
	track: string;
	pitch: number;
	onset: number; // beats from segment start
	duration: number; // beats
	velocity: number;
}

export interface SegmentFrame {
	type: 'segment';
	bar_index: number;
	notes: NoteEvent[];
	recognized: VAPoint | null;
	fused: VAPoint;
	latency_ms: number;
}

export interface MetricsFrame {
	type: 'metrics';
	pcc: number;
	cec: number;
	mctc: number;
	overall: number;
	similarity: number;
	rtfit: number;
	traces?: unknown;
}

export interface ErrorFrame {
	type: 'error';
	code: string;
	msg: string;
}

export interface EndOfSongFrame {
	type: 'end_of_song';
}

export type ServerFrame = SegmentFrame | MetricsFrame | ErrorFrame | EndOfSongFrame;

export class ProtocolError extends Error {}

function isFiniteNumber(x: unknown): x is number {
	return typeof x === 'number' && Number.isFinite(x);
}

function isVAPoint(x: unknown): x is VAPoint {
	if (typeof x !== 'object' || x === null) return false;
	const p = x as Record<string, unknown>;
	return isFiniteNumber(p.v) && isFiniteNumber(p.a) && Math.abs(p.v) <= 1 && Math.abs(p.a) <= 1;
}

export function isTargetFrame(x: unknown): x is TargetFrame {
	if (typeof x !== 'object' || x === null) return false;
	const f = x as Record<string, unknown>;
	return (
		f.type === 'target' &&
		isFiniteNumber(f.v) && Math.abs(f.v) <= 1 &&
		isFiniteNumber(f.a) && Math.abs(f.a) <= 1
	);
}

export function isClientFrame(x: unknown): x is ClientFrame {
	if (typeof x !== 'object' || x === null) return false;
	const f = x as Record<string, unknown>;
	switch (f.type) {
		case 'target':
			return isTargetFrame(x);
		case 'select_song':
			return typeof f.id === 'string' || typeof f.midi_b64 === 'string';
		case 'set_config': {
			const fusionOk =
				f.fusion === undefined || ['median', 'concat', 'features'].includes(f.fusion as string);
			const backendOk = f.backend === undefined || ['rule', 'neural'].includes(f.backend as string);
			const granOk =
				f.granularity === undefined || ['beat', 'bar'].includes(f.granularity as string);
			return fusionOk && backendOk && granOk;
		}
		default:
			return false;
	}
}

function isNoteEvent(x: unknown): x is NoteEvent {
	if (typeof x !== 'object' || x === null) return false;
	const n = x as Record<string, unknown>;
	return (
		typeof n.track === 'string' &&
		isFiniteNumber(n.pitch) &&
		isFiniteNumber(n.onset) &&
		isFiniteNumber(n.duration) &&
		isFiniteNumber(n.velocity)
	);
}

export function isServerFrame(x: unknown): x is ServerFrame {
	if (typeof x !== 'object' || x === null) return false;
	const f = x as Record<string, unknown>;
	switch (f.type) {
		case 'segment':
			return (
				isFiniteNumber(f.bar_index) &&
				Array.isArray(f.notes) &&
				f.notes.every(isNoteEvent) &&
				(f.recognized === null || isVAPoint(f.recognized)) &&
				isVAPoint(f.fused) &&
				isFiniteNumber(f.latency_ms)
			);
		case 'metrics':
			return ['pcc', 'cec', 'mctc', 'overall', 'similarity', 'rtfit'].every((k) =>
				isFiniteNumber(f[k]),
			);
		case 'error':
			return typeof f.code === 'string' && typeof f.msg === 'string';
		case 'end_of_song':
			return true;
		default:
			return false;
	}
}

export function encodeClientFrame(frame: ClientFrame): string {
	if (!isClientFrame(frame)) {
		throw new ProtocolError(`refusing to send malformed frame: ${JSON.stringify(frame)}`);
	}
	return JSON.stringify(frame);
}

export function parseServerFrame(payload: string): ServerFrame {
	let parsed: unknown;
	try {
		parsed = JSON.parse(payload);
	} catch (err) {
		throw new ProtocolError(`bad JSON from server: ${err}`);
	}
	if (!isServerFrame(parsed)) {
		throw new ProtocolError(`unrecognized server frame: ${payload.slice(0, 120)}`);
	}
	return parsed;
}

export function parseClientFrame(payload: string): ClientFrame {
	const parsed: unknown = JSON.parse(payload);
	if (!isClientFrame(parsed)) {
		throw new ProtocolError(`unrecognized client frame: ${payload.slice(0, 120)}`);
	}
	return parsed;
}
