/** Pen-idle trigger: fires once after the last poke, unless cancelled. */

export interface IdleTrigger {
  poke(): void;
  cancel(): void;
}

export function makeIdleTrigger(delayMs: number, fire: () => void): IdleTrigger {
  let handle: ReturnType<typeof setTimeout> | null = null;
  const cancel = () => {
    if (handle !== null) {
      clearTimeout(handle);
      handle = null;
    }
  };
  return {
    poke() {
      cancel();
      handle = setTimeout(() => {
        handle = null;
        fire();
      }, delayMs);
    },
    cancel,
  };
}
