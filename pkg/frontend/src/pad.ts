// XY pad coordinate model. Screen x maps to valence (left -1, right +1),
// screen y to arousal (top +1, bottom -1); the mapping is exactly
// invertible so the knob never drifts under repeated conversions.

export interface VA {
	v: number;
	a: number;
}

export interface ScreenPoint {
	x: number;
	y: number;
}

const clamp = (x: number) => Math.max(-1, Math.min(1, x));

export function screenToVA(p: ScreenPoint, width: number, height: number): VA {
	return {
		v: clamp((p.x / width) * 2 - 1),
		a: clamp(1 - (p.y / height) * 2),
	};
}

export function vaToScreen(va: VA, width: number, height: number): ScreenPoint {
	return {
		x: ((va.v + 1) / 2) * width,
		y: ((1 - va.a) / 2) * height,
	};
}

export interface TimedVA extends VA {
	t: number; // milliseconds
}

export class PadModel {
	current: VA = { v: 0, a: 0 };
	dragging = false;
	trace: TimedVA[] = [];
	recognized: TimedVA[] = [];

	constructor(private readonly maxTrace = 600) {}

	pointerDown(p: ScreenPoint, width: number, height: number, now: number): VA {
		this.dragging = true;
		return this.pointerMove(p, width, height, now);
	}

	pointerMove(p: ScreenPoint, width: number, height: number, now: number): VA {
		this.current = screenToVA(p, width, height);
		if (this.dragging) {
			this.trace.push({ ...this.current, t: now });
			if (this.trace.length > this.maxTrace) this.trace.shift();
		}
		return this.current;
	}

	pointerUp(): void {
		this.dragging = false;
	}

	addRecognized(point: VA, now: number): void {
		this.recognized.push({ ...point, t: now });
		if (this.recognized.length > this.maxTrace) this.recognized.shift();
	}
}
